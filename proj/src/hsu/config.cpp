#include "hsu/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hsu/errors.hpp"

namespace hsu {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& what) {
  fail(ErrorKind::Config, "field '" + field + "': " + what);
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) bad(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(field, "must be finite");
  return v;
}

double positive(const json& j, const std::string& field) {
  const double v = number(j, field);
  if (!(v > 0.0)) bad(field, "must be positive");
  return v;
}

int integer(const json& j, const std::string& field, int lo, int hi) {
  if (!j.is_number_integer() && !(j.is_number() && std::floor(j.get<double>()) == j.get<double>()))
    bad(field, "expected an integer");
  const double v = j.get<double>();
  if (v < lo || v > hi) bad(field, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(v);
}

std::string text(const json& j, const std::string& field) {
  if (!j.is_string()) bad(field, "expected a string");
  return j.get<std::string>();
}

std::vector<double> numbers(const json& j, const std::string& field) {
  if (!j.is_array()) bad(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

void only_keys(const json& j, const std::string& field, const std::set<std::string>& allowed) {
  if (!j.is_object()) bad(field, "expected an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) bad(field.empty() ? key : field + "." + key, "unknown field");
  }
}

SequenceRule parse_rule(const json& j, const std::string& field) {
  SequenceRule r;
  if (j.is_number()) {
    r.value = number(j, field);
    return r;
  }
  only_keys(j, field, {"kind", "value", "c", "exponent", "values"});
  if (j.contains("kind")) r.kind = text(j["kind"], field + ".kind");
  static const std::set<std::string> kinds = {"const", "log", "sqrt_log", "power", "list"};
  if (!kinds.count(r.kind)) bad(field + ".kind", "unknown rule '" + r.kind + "'");
  if (j.contains("value")) r.value = number(j["value"], field + ".value");
  if (j.contains("c")) r.c = positive(j["c"], field + ".c");
  if (j.contains("exponent")) r.exponent = number(j["exponent"], field + ".exponent");
  if (j.contains("values")) r.values = numbers(j["values"], field + ".values");
  if (r.kind == "list" && r.values.empty()) bad(field + ".values", "list rule needs values");
  return r;
}

std::vector<double> parse_grid(const json& j, const std::string& field) {
  std::vector<double> out;
  if (j.is_array()) {
    out = numbers(j, field);
  } else if (j.is_object()) {
    only_keys(j, field, {"from", "to", "points"});
    if (!j.contains("from") || !j.contains("to") || !j.contains("points")) bad(field, "needs from, to and points");
    const double lo = positive(j["from"], field + ".from"), hi = positive(j["to"], field + ".to");
    const int pts = integer(j["points"], field + ".points", 1, 10000);
    for (int i = 0; i < pts; ++i)
      out.push_back(pts == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (pts - 1)));
  } else {
    bad(field, "expected an array or {from, to, points}");
  }
  if (out.empty()) bad(field, "grid is empty");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out[i] > 0.0)) bad(field, "entries must be positive");
    if (i > 0 && !(out[i] > out[i - 1])) bad(field, "entries must be strictly increasing");
  }
  return out;
}

RegimeKind parse_regime(const std::string& s, const std::string& field) {
  if (s == "sparse") return RegimeKind::Sparse;
  if (s == "critical") return RegimeKind::Critical;
  if (s == "dense") return RegimeKind::Dense;
  bad(field, "unknown regime '" + s + "'");
}

std::string position_of(const std::string& text_in, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text_in.size(); ++i) {
    if (text_in[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

std::vector<double> SequenceRule::evaluate(const std::vector<double>& n, double alpha) const {
  std::vector<double> out;
  if (kind == "list") {
    if (values.size() != n.size()) fail(ErrorKind::Config, "list rule must have one value per grid point");
    return values;
  }
  for (double x : n) {
    double v = value;
    if (kind == "log") {
      v = c * std::log(x);
    } else if (kind == "sqrt_log") {
      v = std::sqrt(2.0 * c * std::log(x));
    } else if (kind == "power") {
      double e = 0.0;
      if (exponent) {
        e = *exponent;
      } else {
        if (!(alpha > 0.0)) fail(ErrorKind::Config, "power rule without exponent needs a heavy model");
        e = c / alpha;
      }
      v = value * std::pow(x, e);
    }
    if (!std::isfinite(v)) fail(ErrorKind::Config, "sequence rule produced a non-finite value");
    out.push_back(v);
  }
  return out;
}

GeneratorSpec parse_generator(const json& j, const std::string& field) {
  only_keys(j, field, {"kind", "psi", "alpha", "profile", "table"});
  GeneratorSpec g;
  const std::string kind = j.contains("kind") ? text(j["kind"], field + ".kind") : "light";
  if (kind == "light") {
    g.kind = TailKind::Light;
    if (j.contains("psi")) g.psi = text(j["psi"], field + ".psi");
    if (g.psi == "gaussian") g.psi = "t^2/2";
    if (g.psi == "exponential") g.psi = "t";
    if (g.psi != "t" && g.psi != "t^2/2" && g.psi != "table") bad(field + ".psi", "expected \"t\", \"t^2/2\" or \"table\"");
    if (g.psi == "table") {
      if (!j.contains("table") || !j["table"].is_object()) bad(field + ".table", "tabulated psi needs {t: [...], psi: [...]}");
      only_keys(j["table"], field + ".table", {"t", "psi"});
      g.table_t = numbers(j["table"].value("t", json::array()), field + ".table.t");
      g.table_psi = numbers(j["table"].value("psi", json::array()), field + ".table.psi");
    }
  } else if (kind == "heavy") {
    g.kind = TailKind::Heavy;
    if (j.contains("alpha")) g.alpha = positive(j["alpha"], field + ".alpha");
    if (j.contains("profile")) g.profile = text(j["profile"], field + ".profile");
    if (g.profile != "one-plus" && g.profile != "pareto") bad(field + ".profile", "expected \"one-plus\" or \"pareto\"");
  } else {
    bad(field + ".kind", "expected \"light\" or \"heavy\"");
  }
  return g;
}

KernelSpec parse_kernel(const json& j, const std::string& field) {
  only_keys(j, field, {"kind", "k", "adjacency", "terms"});
  KernelSpec k;
  if (j.contains("kind")) k.kind = text(j["kind"], field + ".kind");
  static const std::set<std::string> kinds = {"edge", "vr", "cech", "noninduced", "induced", "combination"};
  if (!kinds.count(k.kind)) bad(field + ".kind", "unknown kernel '" + k.kind + "'");
  if (j.contains("k")) k.k = integer(j["k"], field + ".k", 1, 7);
  if (k.kind == "noninduced" || k.kind == "induced") {
    if (!j.contains("adjacency") || !j["adjacency"].is_array()) bad(field + ".adjacency", "expected a list of edges");
    for (std::size_t i = 0; i < j["adjacency"].size(); ++i) {
      const json& e = j["adjacency"][i];
      const std::string f = field + ".adjacency[" + std::to_string(i) + "]";
      if (!e.is_array() || e.size() != 2) bad(f, "each edge is a pair [u, v]");
      k.edges.emplace_back(integer(e[0], f, 0, 7), integer(e[1], f, 0, 7));
    }
  }
  if (k.kind == "combination") {
    if (!j.contains("terms") || !j["terms"].is_array() || j["terms"].empty()) bad(field + ".terms", "expected a list");
    for (std::size_t i = 0; i < j["terms"].size(); ++i) {
      const std::string f = field + ".terms[" + std::to_string(i) + "]";
      const json& t = j["terms"][i];
      only_keys(t, f, {"weight", "kernel"});
      if (!t.contains("weight") || !t.contains("kernel")) bad(f, "needs weight and kernel");
      k.terms.emplace_back(number(t["weight"], f + ".weight"), parse_kernel(t["kernel"], f + ".kernel"));
    }
  }
  return k;
}

json generator_json(const GeneratorSpec& g) {
  if (g.kind == TailKind::Heavy) return {{"kind", "heavy"}, {"alpha", g.alpha}, {"profile", g.profile}};
  json j = {{"kind", "light"}, {"psi", g.psi}};
  if (g.psi == "table") j["table"] = {{"t", g.table_t}, {"psi", g.table_psi}};
  return j;
}

json kernel_json(const KernelSpec& k) {
  json j = {{"kind", k.kind}};
  if (k.kind == "vr" || k.kind == "cech") j["k"] = k.k;
  if (!k.edges.empty()) {
    j["adjacency"] = json::array();
    for (const auto& [u, v] : k.edges) j["adjacency"].push_back({u, v});
  }
  if (!k.terms.empty()) {
    j["terms"] = json::array();
    for (const auto& [w, s] : k.terms) j["terms"].push_back({{"weight", w}, {"kernel", kernel_json(s)}});
  }
  return j;
}

std::vector<double> ExperimentPlan::thresholds_t() const {
  return t_rule.evaluate(n_grid, model.kind == TailKind::Heavy ? model.alpha : 0.0);
}

std::vector<double> ExperimentPlan::radii() const { return r_rule.evaluate(n_grid); }

ExperimentPlan parse_plan(const std::string& src, const std::string& source) {
  json j;
  try {
    j = json::parse(src);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, source + ": JSON syntax error at " + position_of(src, e.byte == 0 ? 0 : e.byte - 1));
  }
  only_keys(j, "", {"study", "seed", "body", "dim", "model", "models", "kernel", "angles", "weights", "n_grid",
                    "t_rule", "r_rule", "replicates", "regime", "chi", "limits", "mc", "tuple_budget",
                    "thresholds", "bootstrap", "threads", "sampling", "conditional", "strict_precision", "cache_dir",
                    "points", "radius", "comment"});
  ExperimentPlan p;
  p.raw = j;
  if (!j.contains("study")) bad("study", "missing");
  p.study = text(j["study"], "study");
  static const std::set<std::string> studies = {"moments", "verify", "clt",    "independence", "conditional",
                                                "rates",   "sample", "ustat", "limits"};
  if (!studies.count(p.study)) bad("study", "unknown study kind '" + p.study + "'");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) bad("seed", "expected an unsigned integer");
    p.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("body")) p.body = text(j["body"], "body");
  if (j.contains("dim")) p.dim = integer(j["dim"], "dim", 2, 8);
  if (j.contains("model")) p.model = parse_generator(j["model"], "model");
  if (j.contains("models")) {
    if (!j["models"].is_array() || j["models"].empty()) bad("models", "expected a non-empty list");
    for (std::size_t i = 0; i < j["models"].size(); ++i)
      p.models.push_back(parse_generator(j["models"][i], "models[" + std::to_string(i) + "]"));
  }
  if (j.contains("kernel")) p.kernel = parse_kernel(j["kernel"], "kernel");
  if (j.contains("angles")) {
    if (!j["angles"].is_array() || j["angles"].empty()) bad("angles", "expected a non-empty list");
    for (std::size_t i = 0; i < j["angles"].size(); ++i) {
      const std::string f = "angles[" + std::to_string(i) + "]";
      const json& a = j["angles"][i];
      if (a.is_number()) {
        if (p.dim != 2) bad(f, "scalar angles are only meaningful in d = 2");
        p.angles.push_back(direction_from_angle(number(a, f)));
      } else {
        const std::vector<double> v = numbers(a, f);
        if (static_cast<int>(v.size()) != p.dim) bad(f, "direction must have dim entries");
        Vec th = Eigen::Map<const Vec>(v.data(), p.dim);
        try {
          th = normalize_direction(th);
        } catch (const Error& e) {
          bad(f, e.what());
        }
        p.angles.push_back(th);
      }
    }
  } else {
    Vec e = Vec::Zero(p.dim);
    e[p.dim - 1] = 1.0;
    p.angles.push_back(e);
  }
  if (j.contains("weights")) {
    p.weights = numbers(j["weights"], "weights");
    if (p.weights.size() != p.angles.size()) bad("weights", "one weight per angle is required");
  } else {
    p.weights.assign(p.angles.size(), 1.0);
  }
  bool any = false;
  for (double w : p.weights) any = any || w != 0.0;
  if (!any) bad("weights", "weights must not all be zero");
  if (j.contains("n_grid")) p.n_grid = parse_grid(j["n_grid"], "n_grid");
  if (j.contains("t_rule")) p.t_rule = parse_rule(j["t_rule"], "t_rule");
  if (j.contains("r_rule")) p.r_rule = parse_rule(j["r_rule"], "r_rule");
  if (j.contains("replicates")) p.replicates = integer(j["replicates"], "replicates", 1, 100000000);
  if (j.contains("regime")) p.regime = parse_regime(text(j["regime"], "regime"), "regime");
  if (j.contains("chi")) p.chi = positive(j["chi"], "chi");
  if (j.contains("limits")) {
    only_keys(j["limits"], "limits", {"xi", "beta"});
    auto limit_value = [&](const char* key) -> std::optional<double> {
      if (!j["limits"].contains(key)) return std::nullopt;
      const json& v = j["limits"][key];
      if (v.is_string() && (v == "inf" || v == "infinity")) return std::numeric_limits<double>::infinity();
      const double x = number(v, std::string("limits.") + key);
      if (x < 0.0) bad(std::string("limits.") + key, "must be >= 0");
      return x;
    };
    p.limits.xi = limit_value("xi");
    p.limits.beta = limit_value("beta");
  }
  if (j.contains("mc")) {
    only_keys(j["mc"], "mc", {"samples", "batches", "seed", "warn_rel_se"});
    if (j["mc"].contains("samples")) p.mc.samples = static_cast<std::size_t>(integer(j["mc"]["samples"], "mc.samples", 2, 1 << 30));
    if (j["mc"].contains("batches")) p.mc.batches = integer(j["mc"]["batches"], "mc.batches", 2, 4096);
    if (j["mc"].contains("seed")) p.mc.seed = j["mc"]["seed"].get<std::uint64_t>();
    else p.mc.seed = derive_seed(p.seed, 0x6d63ULL);
    if (j["mc"].contains("warn_rel_se")) p.mc.warn_rel_se = positive(j["mc"]["warn_rel_se"], "mc.warn_rel_se");
  } else {
    p.mc.seed = derive_seed(p.seed, 0x6d63ULL);
  }
  if (j.contains("tuple_budget")) p.tuple_budget = static_cast<std::uint64_t>(positive(j["tuple_budget"], "tuple_budget"));
  if (j.contains("thresholds")) {
    p.thresholds = numbers(j["thresholds"], "thresholds");
    for (double s : p.thresholds)
      if (s < 0.0) bad("thresholds", "thresholds s_i must be >= 0");
  }
  if (j.contains("bootstrap")) p.bootstrap = integer(j["bootstrap"], "bootstrap", 0, 100000);
  if (j.contains("threads")) p.threads = integer(j["threads"], "threads", 1, 1024);
  p.mc.threads = p.threads;
  if (j.contains("sampling")) {
    const std::string s = text(j["sampling"], "sampling");
    if (s == "shell") p.sampling = SamplingMode::Shell;
    else if (s == "full") p.sampling = SamplingMode::Full;
    else bad("sampling", "expected \"shell\" or \"full\"");
  }
  if (j.contains("conditional")) {
    if (!j["conditional"].is_boolean()) bad("conditional", "expected true or false");
    p.conditional = j["conditional"].get<bool>();
  }
  if (j.contains("strict_precision")) {
    if (!j["strict_precision"].is_boolean()) bad("strict_precision", "expected true or false");
    p.strict_precision = j["strict_precision"].get<bool>();
  }
  if (j.contains("cache_dir")) p.cache_dir = text(j["cache_dir"], "cache_dir");
  if (j.contains("points")) p.points = text(j["points"], "points");
  if (j.contains("radius")) p.radius = positive(j["radius"], "radius");

  const bool needs_grid = p.study != "sample" && p.study != "ustat" && p.study != "limits";
  if (needs_grid && p.n_grid.empty()) bad("n_grid", "missing");
  if ((p.study == "clt" || p.study == "conditional") && p.replicates < 100)
    bad("replicates", "CLT studies need at least 100 replicates");
  if (p.study == "independence") {
    if (p.angles.size() != 2) bad("angles", "independence studies take exactly two angles");
    if (p.thresholds.empty()) p.thresholds = {0.0, 0.0};
    if (p.thresholds.size() != 2) bad("thresholds", "two thresholds are required");
  }
  if (p.study == "conditional" && p.models.empty()) bad("models", "conditional studies compare a list of models");
  return p;
}

ExperimentPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_plan(ss.str(), path);
}

}  // namespace hsu
