#include "hsu/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>

#include "hsu/errors.hpp"

namespace hsu {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t hash_json(const json& j) {
  const std::string s = j.dump();
  return fnv1a64(std::span<const char>(s.data(), s.size()));
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

struct Moments {
  double mean = 0.0, mean_se = 0.0, var = 0.0, var_se = 0.0;
};

Moments moments_of(const std::vector<double>& x) {
  Moments m;
  const double r = static_cast<double>(x.size());
  if (x.size() < 2) fail(ErrorKind::InvalidInput, "need at least two replicates");
  m.mean = mean(x);
  m.var = variance(x);
  double m4 = 0.0;
  for (double v : x) m4 += std::pow(v - m.mean, 4);
  m4 /= r;
  m.mean_se = std::sqrt(m.var / r);
  m.var_se = std::sqrt(std::max(0.0, (m4 - m.var * m.var) / r));
  return m;
}

double covariance_se(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y), c = covariance(x, y);
  double e = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) e += std::pow((x[i] - mx) * (y[i] - my), 2);
  e /= static_cast<double>(x.size());
  return std::sqrt(std::max(0.0, (e - c * c) / static_cast<double>(x.size())));
}

double alpha_of(const GeneratorSpec& g) { return g.kind == TailKind::Heavy ? g.alpha : 0.0; }

const char* family_name(NormalizerFamily f) {
  switch (f) {
    case NormalizerFamily::LightXi: return "light";
    case NormalizerFamily::Lite: return "lite";
    case NormalizerFamily::Heavy: return "heavy";
  }
  return "unknown";
}

const char* tail_label(NormalizerFamily f) {
  switch (f) {
    case NormalizerFamily::LightXi: return "exponential";
    case NormalizerFamily::Lite: return "gaussian";
    case NormalizerFamily::Heavy: return "heavy";
  }
  return "unknown";
}

json base_key(const ExperimentPlan& plan, const StudySetup& s, const std::string& name) {
  return {{"name", name},
          {"body", s.body->tag()},
          {"model", s.model->tag()},
          {"kernel", kernel_json(plan.kernel)},
          {"mc", {{"seed", plan.mc.seed}, {"samples", plan.mc.samples}, {"batches", plan.mc.batches}}},
          {"version", kVersion}};
}

double xi_value(const StudySetup& s) { return s.tail.xi.cls == LimitClass::Infinite ? INFINITY : s.tail.xi.value; }

double beta_value(const StudySetup& s) { return s.tail.beta.value; }

// E limit for one angle, per family.
LimitConstant expectation_constant(const ExperimentPlan& plan, const StudySetup& s, std::size_t a) {
  json key = base_key(plan, s, "expectation");
  key["theta"] = vec_json(s.frames[a].theta);
  key["family"] = family_name(s.family);
  const Kernel& h = *s.kernel;
  switch (s.family) {
    case NormalizerFamily::LightXi:
      key["xi"] = xi_value(s);
      key["r"] = s.tail.r_limit;
      return cached_constant(plan.cache_dir, key, [&] {
        return expectation_limit_light(h, s.frames[a], xi_value(s), s.tail.r_limit, plan.mc);
      });
    case NormalizerFamily::Lite:
      key["beta"] = beta_value(s);
      key["r"] = s.tail.r_limit;
      return cached_constant(plan.cache_dir, key, [&] {
        return expectation_limit_lite(h, s.frames[a], beta_value(s), s.tail.r_limit, plan.mc);
      });
    case NormalizerFamily::Heavy:
      key["alpha"] = s.model->alpha();
      return cached_constant(plan.cache_dir, key, [&] {
        return expectation_limit_heavy(h, *s.body, s.model->alpha(), s.frames[a].theta, plan.mc);
      });
  }
  fail(ErrorKind::State, "unknown normalizer family");
}

// Components l = 1..k+1 of the (co)variance between angles a and b.
std::map<int, LimitConstant> variance_components(const ExperimentPlan& plan, const StudySetup& s, std::size_t a,
                                                 std::size_t b) {
  const Kernel& h = *s.kernel;
  const int k = h.order();
  std::map<int, LimitConstant> out;
  for (int l = 1; l <= k + 1; ++l) {
    json key = base_key(plan, s, "component");
    key["l"] = l;
    key["family"] = family_name(s.family);
    key["theta1"] = vec_json(s.frames[a].theta);
    switch (s.family) {
      case NormalizerFamily::LightXi:
        key["xi"] = xi_value(s);
        key["r"] = s.tail.r_limit;
        out[l] = cached_constant(plan.cache_dir, key, [&] {
          return integral_Ikl(h, s.frames[a], l, xi_value(s), s.tail.r_limit, plan.mc);
        });
        break;
      case NormalizerFamily::Lite:
        key["beta"] = beta_value(s);
        key["r"] = s.tail.r_limit;
        out[l] = cached_constant(plan.cache_dir, key, [&] {
          return integral_Istar_kl(h, s.frames[a], l, beta_value(s), s.tail.r_limit, plan.mc);
        });
        break;
      case NormalizerFamily::Heavy:
        key["theta2"] = vec_json(s.frames[b].theta);
        key["alpha"] = s.model->alpha();
        out[l] = cached_constant(plan.cache_dir, key, [&] {
          return integral_Hkl(h, *s.body, l, s.model->alpha(), s.frames[a].theta, s.frames[b].theta, plan.mc);
        });
        break;
    }
  }
  return out;
}

void collect_warnings(StudyResult& res, const ExperimentPlan& plan, const LimitConstant& c) {
  if (!c.precision_warning) return;
  res.warnings.push_back("relative standard error " + num(c.relative_se()) + " above target for " + c.name);
  if (plan.strict_precision) res.precision_failure = true;
}

std::string csv_line(std::initializer_list<std::string> cells) {
  std::string s;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) s += ',';
    s += c;
    first = false;
  }
  return s + "\n";
}

std::vector<double> resample(const std::vector<double>& x, Rng& rng) {
  std::vector<double> out(x.size());
  std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
  for (double& v : out) v = x[pick(rng)];
  return out;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(std::floor(pos));
  const double f = pos - i;
  return i + 1 < v.size() ? v[i] * (1 - f) + v[i + 1] * f : v.back();
}

LineFit tail_fit(const std::vector<double>& x, const std::vector<double>& y, std::size_t last = 5) {
  const std::size_t first = x.size() > last ? x.size() - last : 0;
  std::vector<double> lx, ly;
  for (std::size_t i = first; i < x.size(); ++i) {
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  if (lx.size() < 2) return {};
  return fit_line(lx, ly);
}

bool monotone_within(const std::vector<double>& v, const std::vector<double>& se) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[i - 1]) + 2.0 * std::hypot(se[i], se[i - 1])) return false;
  return true;
}

}  // namespace

// Setup

StudySetup prepare_study(const ExperimentPlan& plan, const GeneratorSpec& generator) {
  StudySetup s;
  s.body = make_body(plan.body, plan.dim);
  s.model = std::make_shared<DensityModel>(s.body, generator);
  s.kernel = make_kernel(plan.kernel);
  s.n = plan.n_grid;
  if (s.n.empty()) fail(ErrorKind::Config, "field 'n_grid': missing");
  s.t = plan.t_rule.evaluate(s.n, alpha_of(generator));
  s.r = plan.r_rule.evaluate(s.n);
  for (double t : s.t)
    if (!(t >= 1.0)) fail(ErrorKind::Config, "field 't_rule': thresholds must be >= 1 on the n grid");
  for (double r : s.r)
    if (!(r > 0.0)) fail(ErrorKind::Config, "field 'r_rule': radii must be positive");
  try {
    s.tail = tail_params(*s.model, s.t, s.r, plan.limits);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidInput) fail(ErrorKind::Config, std::string("field 't_rule': ") + e.what());
    throw;
  }
  s.family = normalizer_family(*s.model, s.tail);
  // Analytic rules are probed past the grid; the regime is a property of the limit.
  std::vector<double> probe_n = s.n, probe_t = s.t, probe_r = s.r;
  if (plan.t_rule.kind != "list" && plan.r_rule.kind != "list") {
    std::vector<double> pn = s.n;
    for (double e : {10.0, 20.0, 40.0}) {
      const double n = s.n.back() * std::pow(10.0, e);
      if (n > 1e250) break;
      pn.push_back(n);
    }
    try {
      const std::vector<double> pt = plan.t_rule.evaluate(pn, alpha_of(generator)), pr = plan.r_rule.evaluate(pn);
      bool finite = true;
      for (std::size_t i = 0; i < pn.size(); ++i)
        finite = finite && std::isfinite(regime_driver(*s.model, s.family, pn[i], pt[i], pr[i]));
      if (finite) {
        probe_n = pn;
        probe_t = pt;
        probe_r = pr;
      }
    } catch (const Error&) {
    }
  }
  const Regime classified = classify_regime(*s.model, s.family, probe_n, probe_t, probe_r);
  if (plan.chi) {
    s.regime = {RegimeKind::Critical, *plan.chi};
  } else {
    s.regime = classified;
  }
  if (plan.regime && *plan.regime != s.regime.kind)
    fail(ErrorKind::Config, std::string("field 'regime': plan says ") + regime_name(*plan.regime) +
                                " but the grid classifies as " + regime_name(s.regime.kind));
  for (const Vec& th : plan.angles) {
    if (th.size() != s.body->dim()) fail(ErrorKind::Config, "field 'angles': dimension mismatch");
    s.frames.push_back(initial_transformation(*s.body, th));
  }
  return s;
}

std::vector<double> ReplicateValues::column(std::size_t a) const {
  std::vector<double> out(replicates);
  for (std::size_t i = 0; i < replicates; ++i) out[i] = values[i * angles + a];
  return out;
}

std::vector<double> ReplicateValues::combined(const std::vector<double>& weights) const {
  std::vector<double> out(replicates, 0.0);
  for (std::size_t i = 0; i < replicates; ++i)
    for (std::size_t a = 0; a < angles; ++a) out[i] += weights[a] * values[i * angles + a];
  return out;
}

ReplicateValues simulate_restricted(const ExperimentPlan& plan, const StudySetup& s, std::size_t gi) {
  const double n = s.n[gi], t = s.t[gi], r = s.r[gi];
  std::optional<RadialTable> table;
  if (plan.sampling == SamplingMode::Shell) table.emplace(*s.model, t);
  std::vector<Halfspace> hs;
  for (const AffineFrame& f : s.frames) hs.push_back(outer_halfspace(*s.body, f.theta, t));
  ReplicateValues out;
  out.replicates = static_cast<std::size_t>(plan.replicates);
  out.angles = hs.size();
  out.values.assign(out.replicates * out.angles, 0.0);
  ComputeOptions copt;
  copt.budget = plan.tuple_budget;
  parallel_for(out.replicates, plan.threads, [&](std::size_t rep) {
    const std::uint64_t stream = (static_cast<std::uint64_t>(gi) << 32) | rep;
    const PointCloud parent = table ? sample_shell(*s.model, *table, n, plan.seed, stream)
                                    : sample_poisson(*s.model, n, plan.seed, stream);
    for (std::size_t a = 0; a < hs.size(); ++a)
      out.values[rep * out.angles + a] = compute_S(restrict_cloud(parent, hs[a]), *s.kernel, r, copt).value;
  });
  return out;
}

ReplicateValues simulate_conditional(const ExperimentPlan& plan, const StudySetup& s, std::size_t gi) {
  const double n = s.n[gi], t = s.t[gi], r = s.r[gi];
  const RadialTable table(*s.model, t);
  std::vector<Halfspace> hs;
  for (const AffineFrame& f : s.frames) hs.push_back(outer_halfspace(*s.body, f.theta, t));
  ReplicateValues out;
  out.replicates = static_cast<std::size_t>(plan.replicates);
  out.angles = hs.size();
  out.values.assign(out.replicates * out.angles, 0.0);
  ComputeOptions copt;
  copt.budget = plan.tuple_budget;
  parallel_for(out.replicates, plan.threads, [&](std::size_t rep) {
    for (std::size_t a = 0; a < hs.size(); ++a) {
      const std::uint64_t stream = (static_cast<std::uint64_t>(gi) << 40) | (static_cast<std::uint64_t>(a) << 32) | rep;
      const PointCloud cloud = sample_conditional(*s.model, n, hs[a], plan.seed, stream, &table);
      out.values[rep * out.angles + a] = compute_S(cloud, *s.kernel, r, copt).value;
    }
  });
  return out;
}

SlopeEstimate dk_slope(const std::vector<double>& n, const std::vector<std::vector<double>>& samples, int bootstrap,
                       std::uint64_t seed) {
  if (n.size() != samples.size() || n.size() < 2) fail(ErrorKind::InvalidInput, "slope needs at least two grid points");
  std::vector<double> dk;
  for (const auto& s : samples) dk.push_back(kolmogorov_to_normal(s));
  const LineFit fit = tail_fit(n, dk);
  SlopeEstimate out;
  out.slope = fit.slope;
  out.se = fit.slope_se;
  out.points = std::min<std::size_t>(5, n.size());
  if (bootstrap <= 0) {
    out.lo = fit.slope - 1.96 * fit.slope_se;
    out.hi = fit.slope + 1.96 * fit.slope_se;
    return out;
  }
  const std::size_t first = n.size() > 5 ? n.size() - 5 : 0;
  std::vector<double> slopes(static_cast<std::size_t>(bootstrap));
  for (int b = 0; b < bootstrap; ++b) {
    std::vector<double> d(dk);
    for (std::size_t i = first; i < n.size(); ++i) {
      Rng rng = make_rng(seed, 0x626f6f74ULL + static_cast<std::uint64_t>(b), i);
      d[i] = kolmogorov_to_normal(resample(samples[i], rng));
    }
    slopes[b] = tail_fit(n, d).slope;
  }
  out.lo = quantile(slopes, 0.025);
  out.hi = quantile(slopes, 0.975);
  return out;
}

json to_json(const LimitConstant& c) {
  json inputs = json::object();
  for (const auto& [k, v] : c.inputs) inputs[k] = v;
  return {{"kind", c.kind},       {"name", c.name},       {"regime", c.regime},
          {"inputs", inputs},     {"value", c.value},     {"se", c.se},
          {"samples", c.samples}, {"precision_warning", c.precision_warning}};
}

LimitConstant limit_from_json(const json& j) {
  LimitConstant c;
  c.kind = j.at("kind").get<std::string>();
  c.name = j.at("name").get<std::string>();
  c.regime = j.at("regime").get<std::string>();
  for (const auto& [k, v] : j.at("inputs").items()) c.inputs[k] = v.is_number() ? v.get<double>() : INFINITY;
  c.value = j.at("value").get<double>();
  c.se = j.at("se").get<double>();
  c.samples = j.at("samples").get<std::size_t>();
  c.precision_warning = j.at("precision_warning").get<bool>();
  return c;
}

LimitConstant cached_constant(const std::string& cache_dir, const json& key,
                              const std::function<LimitConstant()>& compute) {
  if (cache_dir.empty()) return compute();
  const fs::path file = fs::path(cache_dir) / (hex64(hash_json(key)) + ".json");
  if (fs::exists(file)) {
    std::ifstream in(file);
    try {
      const json j = json::parse(in);
      if (j.at("key") == key) return limit_from_json(j.at("constant"));
    } catch (const std::exception&) {
      // unreadable cache entries are recomputed
    }
  }
  const LimitConstant c = compute();
  std::error_code ec;
  fs::create_directories(cache_dir, ec);
  std::ofstream out(file);
  if (out) out << json{{"key", key}, {"constant", to_json(c)}}.dump(1) << "\n";
  return c;
}

// Moment study

StudyResult run_moment_study(const ExperimentPlan& plan) {
  const StudySetup s = prepare_study(plan, plan.model);
  const Kernel& h = *s.kernel;
  const int k = h.order();
  const int d = s.body->dim();
  const std::size_t m = s.frames.size();
  StudyResult res;

  std::vector<LimitConstant> e_lim(m), v_lim(m);
  std::vector<std::map<int, LimitConstant>> comps(m);
  json limits = json::array();
  bool positivity = true;
  for (std::size_t a = 0; a < m; ++a) {
    e_lim[a] = expectation_constant(plan, s, a);
    comps[a] = variance_components(plan, s, a, a);
    v_lim[a] = variance_limit(s.family, s.regime.kind, k, comps[a], s.regime.chi);
    collect_warnings(res, plan, e_lim[a]);
    limits.push_back(to_json(e_lim[a]));
    for (const auto& [l, c] : comps[a]) {
      collect_warnings(res, plan, c);
      limits.push_back(to_json(c));
      if (!(c.value > 5.0 * c.se) || !(c.value > 0.0)) positivity = false;
    }
    limits.push_back(to_json(v_lim[a]));
  }
  if (!positivity)
    res.warnings.push_back(h.positivity_guaranteed()
                               ? "a variance component is not positive at 5 standard errors"
                               : "variance-limit positivity fails for a kernel without a positivity guarantee");
  // Heavy tails keep cross-angle covariance in the limit.
  std::vector<std::vector<std::optional<LimitConstant>>> cov_lim(m, std::vector<std::optional<LimitConstant>>(m));
  std::vector<std::vector<std::map<int, LimitConstant>>> cov_comps(m, std::vector<std::map<int, LimitConstant>>(m));
  if (s.family == NormalizerFamily::Heavy) {
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) {
        cov_comps[a][b] = a == b ? comps[a] : variance_components(plan, s, a, b);
        LimitConstant c = variance_limit(s.family, s.regime.kind, k, cov_comps[a][b], s.regime.chi);
        c.kind = "covariance";
        c.name = "C";
        cov_lim[a][b] = c;
        if (a < b) limits.push_back(to_json(c));
      }
  }

  json grid = json::array();
  std::string ratios = csv_line({"n", "t", "r", "angle", "mean", "mean_se", "variance", "variance_se", "mean_ratio",
                                 "mean_ratio_se", "variance_ratio", "variance_ratio_se", "variance_ratio_finite"});
  std::string covs = csv_line({"n", "a", "b", "covariance", "covariance_se", "normalized", "normalized_se",
                               "correlation"});
  std::vector<std::vector<std::vector<double>>> cov_trace(m, std::vector<std::vector<double>>(m)),
      cov_trace_se(m, std::vector<std::vector<double>>(m));
  const bool mecke = plan.kernel.kind == "edge" && d == 2;
  for (std::size_t gi = 0; gi < s.n.size(); ++gi) {
    const double n = s.n[gi], t = s.t[gi], r = s.r[gi];
    const ReplicateValues rv = simulate_restricted(plan, s, gi);
    const double chi_n = regime_driver(*s.model, s.family, n, t, r);
    const double mnorm = mean_normalizer(*s.model, s.family, k, n, t, r);
    const double tau = variance_normalizer(*s.model, s.family, s.regime.kind, k, n, t, r);
    const double tau_crit = variance_normalizer(*s.model, s.family, RegimeKind::Critical, k, n, t, r);
    json row = {{"n", n}, {"t", t}, {"r", r}, {"chi_n", chi_n}, {"mean_normalizer", mnorm}, {"variance_normalizer", tau}};
    if (s.family == NormalizerFamily::Heavy)
      row["mean_normalizer_t"] = mean_normalizer(*s.model, s.family, k, n, t, r, false);
    json per_angle = json::array();
    std::vector<std::vector<double>> cols(m);
    for (std::size_t a = 0; a < m; ++a) {
      cols[a] = rv.column(a);
      const Moments mo = moments_of(cols[a]);
      const double e_ref = mnorm * e_lim[a].value;
      const double v_ref = tau * v_lim[a].value;
      const double v_fin = tau_crit * variance_limit(s.family, RegimeKind::Critical, k, comps[a], chi_n).value;
      json pa = {{"angle", a},
                 {"mean", mo.mean},
                 {"mean_se", mo.mean_se},
                 {"variance", mo.var},
                 {"variance_se", mo.var_se},
                 {"mean_ratio", mo.mean / e_ref},
                 {"mean_ratio_se", mo.mean_se / e_ref},
                 {"variance_ratio", mo.var / v_ref},
                 {"variance_ratio_se", mo.var_se / v_ref},
                 {"variance_ratio_finite", mo.var / v_fin}};
      if (s.family == NormalizerFamily::Heavy) pa["mean_normalized_t"] = mo.mean / row["mean_normalizer_t"].get<double>();
      // Negative control: normalizing by the other regimes.
      json other = json::object();
      for (RegimeKind rk : {RegimeKind::Sparse, RegimeKind::Critical, RegimeKind::Dense}) {
        if (rk == s.regime.kind) continue;
        other[regime_name(rk)] = mo.var / variance_normalizer(*s.model, s.family, rk, k, n, t, r);
      }
      pa["variance_over_other_normalizers"] = other;
      if (mecke) {
        const double q = mecke_edge_mean(*s.model, s.frames[a].theta, n, t, r);
        pa["mecke_mean"] = q;
        pa["mecke_z"] = (mo.mean - q) / mo.mean_se;
      }
      ratios += csv_line({num(n), num(t), num(r), std::to_string(a), num(mo.mean), num(mo.mean_se), num(mo.var),
                          num(mo.var_se), num(mo.mean / e_ref), num(mo.mean_se / e_ref), num(mo.var / v_ref),
                          num(mo.var_se / v_ref), num(mo.var / v_fin)});
      per_angle.push_back(pa);
    }
    row["angles"] = per_angle;
    json cov = json::array();
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b) {
        const double c = covariance(cols[a], cols[b]);
        const double cse = covariance_se(cols[a], cols[b]);
        const double va = variance(cols[a]), vb = variance(cols[b]);
        const double corr = va > 0 && vb > 0 ? c / std::sqrt(va * vb) : 0.0;
        json cj = {{"a", a}, {"b", b}, {"covariance", c}, {"covariance_se", cse}, {"normalized", c / tau},
                   {"normalized_se", cse / tau}, {"correlation", corr}, {"z", cse > 0 ? c / cse : 0.0}};
        if (cov_lim[a][b]) {
          cj["limit"] = cov_lim[a][b]->value;
          cj["ratio"] = c / (tau * cov_lim[a][b]->value);
          const double pa = variance_limit(s.family, s.regime.kind, k, comps[a], s.regime.chi).value;
          const double pb = variance_limit(s.family, s.regime.kind, k, comps[b], s.regime.chi).value;
          cj["predicted_correlation"] = cov_lim[a][b]->value / std::sqrt(pa * pb);
        }
        cov_trace[a][b].push_back(c / tau);
        cov_trace_se[a][b].push_back(cse / tau);
        covs += csv_line({num(n), std::to_string(a), std::to_string(b), num(c), num(cse), num(c / tau),
                          num(cse / tau), num(corr)});
        cov.push_back(cj);
      }
    row["covariances"] = cov;
    grid.push_back(row);
  }
  json trends = json::array();
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b)
      trends.push_back({{"a", a},
                        {"b", b},
                        {"normalized", cov_trace[a][b]},
                        {"final", cov_trace[a][b].back()},
                        {"monotone", monotone_within(cov_trace[a][b], cov_trace_se[a][b])}});
  res.report = {{"study", "moments"},
                {"family", family_name(s.family)},
                {"regime", regime_name(s.regime.kind)},
                {"chi", s.regime.chi},
                {"k", k},
                {"d", d},
                {"xi", s.family == NormalizerFamily::LightXi ? xi_value(s) : 0.0},
                {"beta", s.family == NormalizerFamily::Lite ? beta_value(s) : 0.0},
                {"r_limit", s.tail.r_limit},
                {"limits", limits},
                {"grid", grid},
                {"covariance_trends", trends},
                {"positivity", positivity},
                {"warnings", res.warnings}};
  res.files["ratios.csv"] = ratios;
  res.files["covariance.csv"] = covs;
  return res;
}

// CLT study

namespace {

double theory_rate(const StudySetup& s, int k, double n, double t) {
  const int d = s.body->dim();
  const double g = s.model->g(t);
  switch (s.family) {
    case NormalizerFamily::LightXi: return 1.0 / std::sqrt(n * s.model->q(t) * std::pow(g, 3 * k + 1));
    case NormalizerFamily::Lite: return 1.0 / std::sqrt(n * std::pow(s.model->q(t) * g, 3 * k + 1));
    case NormalizerFamily::Heavy: return 1.0 / std::sqrt(n * std::pow(t, d) * std::pow(g, 3 * k + 1));
  }
  return 0.0;
}

json predicted_correlations(const ExperimentPlan& plan, const StudySetup& s, std::vector<std::vector<double>>& pred,
                            std::vector<std::vector<double>>& pred_se) {
  const std::size_t m = s.frames.size();
  const Kernel& h = *s.kernel;
  pred.assign(m, std::vector<double>(m, 0.0));
  pred_se.assign(m, std::vector<double>(m, 0.0));
  json out = json::array();
  std::vector<LimitConstant> diag(m);
  for (std::size_t a = 0; a < m; ++a) {
    json key = base_key(plan, s, "covariance");
    key["theta1"] = key["theta2"] = vec_json(s.frames[a].theta);
    key["regime"] = regime_name(s.regime.kind);
    key["chi"] = s.regime.chi;
    diag[a] = cached_constant(plan.cache_dir, key, [&] {
      return covariance_function(h, *s.body, s.model->alpha(), s.regime.kind, s.regime.chi, s.frames[a].theta,
                                 s.frames[a].theta, plan.mc);
    });
  }
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      json key = base_key(plan, s, "covariance");
      key["theta1"] = vec_json(s.frames[a].theta);
      key["theta2"] = vec_json(s.frames[b].theta);
      key["regime"] = regime_name(s.regime.kind);
      key["chi"] = s.regime.chi;
      const LimitConstant c = cached_constant(plan.cache_dir, key, [&] {
        return covariance_function(h, *s.body, s.model->alpha(), s.regime.kind, s.regime.chi, s.frames[a].theta,
                                   s.frames[b].theta, plan.mc);
      });
      const double denom = std::sqrt(diag[a].value * diag[b].value);
      const double rho = c.value / denom;
      // Delta method on the ratio; the shared kernel integral cancels to first order.
      const double se = std::abs(rho) * std::sqrt(std::pow(c.se / c.value, 2) +
                                                  0.25 * std::pow(diag[a].se / diag[a].value, 2) +
                                                  0.25 * std::pow(diag[b].se / diag[b].value, 2));
      pred[a][b] = pred[b][a] = rho;
      pred_se[a][b] = pred_se[b][a] = std::isfinite(se) ? se : 0.0;
      out.push_back({{"a", a}, {"b", b}, {"covariance", to_json(c)}, {"correlation", rho}, {"correlation_se", pred_se[a][b]}});
    }
  return out;
}

}  // namespace

StudyResult run_clt_study(const ExperimentPlan& plan) {
  if (plan.replicates < 100) fail(ErrorKind::Config, "field 'replicates': CLT studies need at least 100 replicates");
  const StudySetup s = prepare_study(plan, plan.model);
  const int k = s.kernel->order();
  const std::size_t m = s.frames.size();
  StudyResult res;
  std::vector<std::vector<double>> combined;
  json grid = json::array();
  std::string csv = csv_line({"n", "t", "r", "d_K", "theory_rate"});
  std::vector<std::vector<double>> pred, pred_se;
  json predictions;
  if (s.family == NormalizerFamily::Heavy && m >= 2) predictions = predicted_correlations(plan, s, pred, pred_se);
  std::vector<double> theory;
  for (std::size_t gi = 0; gi < s.n.size(); ++gi) {
    const ReplicateValues rv = simulate_restricted(plan, s, gi);
    combined.push_back(rv.combined(plan.weights));
    const double dk = kolmogorov_to_normal(combined.back());
    theory.push_back(theory_rate(s, k, s.n[gi], s.t[gi]));
    json marg = json::array();
    std::vector<std::vector<double>> cols(m);
    for (std::size_t a = 0; a < m; ++a) {
      cols[a] = rv.column(a);
      marg.push_back(kolmogorov_to_normal(cols[a]));
    }
    const Moments mo = moments_of(combined.back());
    json row = {{"n", s.n[gi]}, {"t", s.t[gi]}, {"r", s.r[gi]}, {"d_K", dk}, {"marginal_d_K", marg},
                {"mean", mo.mean}, {"sd", std::sqrt(mo.var)}, {"theory_rate", theory.back()}};
    if (!pred.empty()) {
      json corr = json::array();
      const double rr = static_cast<double>(plan.replicates);
      for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) {
          const double rho = correlation(cols[a], cols[b]);
          const double se = std::hypot((1.0 - rho * rho) / std::sqrt(rr - 1.0), pred_se[a][b]);
          corr.push_back({{"a", a}, {"b", b}, {"empirical", rho}, {"predicted", pred[a][b]}, {"se", se},
                          {"z", (rho - pred[a][b]) / se}});
        }
      row["correlations"] = corr;
    }
    csv += csv_line({num(s.n[gi]), num(s.t[gi]), num(s.r[gi]), num(dk), num(theory.back())});
    grid.push_back(row);
  }
  json slope_json;
  if (s.n.size() >= 2) {
    const SlopeEstimate sl = dk_slope(s.n, combined, plan.bootstrap, derive_seed(plan.seed, 0x736c6f70ULL));
    const LineFit tf = tail_fit(s.n, theory);
    slope_json = {{"slope", sl.slope}, {"ci_low", sl.lo}, {"ci_high", sl.hi}, {"se", sl.se}, {"points", sl.points},
                  {"theory_slope", tf.slope}};
  }
  res.report = {{"study", "clt"},
                {"family", family_name(s.family)},
                {"regime", regime_name(s.regime.kind)},
                {"chi", s.regime.chi},
                {"weights", plan.weights},
                {"grid", grid},
                {"slope", slope_json},
                {"final_d_K", grid.back()["d_K"]},
                {"replicates", plan.replicates}};
  if (!predictions.is_null()) res.report["predicted_correlations"] = predictions;
  res.files["dk.csv"] = csv;
  return res;
}

// Independence study

StudyResult run_independence_study(const ExperimentPlan& plan) {
  if (plan.angles.size() != 2) fail(ErrorKind::Config, "field 'angles': independence studies take exactly two angles");
  for (double sv : plan.thresholds)
    if (sv < 0.0) fail(ErrorKind::Config, "field 'thresholds': thresholds s_i must be >= 0");
  const StudySetup s = prepare_study(plan, plan.model);
  StudyResult res;
  std::vector<std::vector<double>> pred, pred_se;
  json predictions;
  if (s.family == NormalizerFamily::Heavy) predictions = predicted_correlations(plan, s, pred, pred_se);
  json grid = json::array();
  std::vector<double> gaps, gap_se;
  std::string csv = csv_line({"n", "t", "r", "gap", "gap_se", "correlation"});
  const int boot = std::max(plan.bootstrap, 20);
  for (std::size_t gi = 0; gi < s.n.size(); ++gi) {
    const ReplicateValues rv = simulate_restricted(plan, s, gi);
    const std::vector<double> x = rv.column(0), y = rv.column(1);
    auto gap_of = [&](const std::vector<std::size_t>* idx) {
      const std::size_t rcount = x.size();
      std::vector<double> xs, ys;
      xs.reserve(rcount);
      ys.reserve(rcount);
      for (std::size_t i = 0; i < rcount; ++i) {
        const std::size_t j = idx ? (*idx)[i] : i;
        xs.push_back(x[j]);
        ys.push_back(y[j]);
      }
      const double mx = mean(xs), my = mean(ys);
      const double sx = std::sqrt(variance(xs)), sy = std::sqrt(variance(ys));
      const double s1 = plan.thresholds[0] * sx + mx, s2 = plan.thresholds[1] * sy + my;
      double p1 = 0, p2 = 0, p12 = 0;
      for (std::size_t i = 0; i < rcount; ++i) {
        const bool a = xs[i] <= s1, b = ys[i] <= s2;
        p1 += a;
        p2 += b;
        p12 += a && b;
      }
      const double rr = static_cast<double>(rcount);
      p1 /= rr;
      p2 /= rr;
      p12 /= rr;
      return std::array<double, 4>{std::abs(p12 - p1 * p2), p1, p2, p12};
    };
    const auto g = gap_of(nullptr);
    std::vector<double> bs(static_cast<std::size_t>(boot));
    std::vector<std::size_t> idx(x.size());
    for (int b = 0; b < boot; ++b) {
      Rng rng = make_rng(plan.seed, 0x67617073ULL + static_cast<std::uint64_t>(b), gi);
      std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
      for (auto& v : idx) v = pick(rng);
      bs[b] = gap_of(&idx)[0];
    }
    const double se = std::sqrt(variance(bs));
    const double rho = correlation(x, y);
    gaps.push_back(g[0]);
    gap_se.push_back(se);
    json row = {{"n", s.n[gi]}, {"t", s.t[gi]}, {"r", s.r[gi]}, {"gap", g[0]}, {"gap_se", se}, {"p1", g[1]},
                {"p2", g[2]}, {"p12", g[3]}, {"correlation", rho}};
    if (!pred.empty()) {
      const double cse = std::hypot((1.0 - rho * rho) / std::sqrt(x.size() - 1.0), pred_se[0][1]);
      row["predicted_correlation"] = pred[0][1];
      row["correlation_se"] = cse;
      row["correlation_z"] = (rho - pred[0][1]) / cse;
    }
    csv += csv_line({num(s.n[gi]), num(s.t[gi]), num(s.r[gi]), num(g[0]), num(se), num(rho)});
    grid.push_back(row);
  }
  const bool decreasing = gaps.size() < 2 || (gaps.back() <= gaps.front() && monotone_within(gaps, gap_se));
  res.report = {{"study", "independence"},
                {"family", family_name(s.family)},
                {"regime", regime_name(s.regime.kind)},
                {"thresholds", plan.thresholds},
                {"grid", grid},
                {"final_gap", gaps.back()},
                {"final_gap_se", gap_se.back()},
                {"min_gap", *std::min_element(gaps.begin(), gaps.end())},
                {"decreasing", decreasing}};
  if (!predictions.is_null()) res.report["predicted_correlations"] = predictions;
  res.files["gaps.csv"] = csv;
  return res;
}

// Conditional study

StudyResult run_conditional_study(const ExperimentPlan& plan) {
  if (plan.models.empty()) fail(ErrorKind::Config, "field 'models': conditional studies compare a list of models");
  if (plan.replicates < 100) fail(ErrorKind::Config, "field 'replicates': CLT studies need at least 100 replicates");
  StudyResult res;
  json per_model = json::array();
  std::map<std::string, std::vector<double>> dk_by_label;
  std::string csv = csv_line({"model", "n", "t", "mean", "variance", "d_K", "dk_order"});
  std::vector<double> n_ref, t_ref;
  for (std::size_t mi = 0; mi < plan.models.size(); ++mi) {
    ExperimentPlan sub = plan;
    sub.angles = {plan.angles[0]};
    const StudySetup s = prepare_study(sub, plan.models[mi]);
    const int k = s.kernel->order();
    if (n_ref.empty()) {
      n_ref = s.n;
      t_ref = s.t;
    } else if (s.t != t_ref) {
      res.warnings.push_back("thresholds differ between models; ordering is not at matched t_n");
    }
    const ConditionalOrders orders = conditional_variance_order(*s.model, s.family, k, s.n, s.t);
    std::vector<std::vector<double>> samples;
    std::vector<double> means, vars, dks, accept;
    json grid = json::array();
    for (std::size_t gi = 0; gi < s.n.size(); ++gi) {
      const ReplicateValues rv = simulate_conditional(sub, s, gi);
      samples.push_back(rv.column(0));
      const Moments mo = moments_of(samples.back());
      means.push_back(mo.mean);
      vars.push_back(mo.var);
      dks.push_back(kolmogorov_to_normal(samples.back()));
      grid.push_back({{"n", s.n[gi]}, {"t", s.t[gi]}, {"mean", mo.mean}, {"mean_se", mo.mean_se},
                      {"variance", mo.var}, {"d_K", dks.back()}, {"dk_order", orders.dk_order[gi]},
                      {"variance_order", orders.variance_order[gi]}, {"mean_order", orders.mean_order[gi]}});
      csv += csv_line({tail_label(s.family), num(s.n[gi]), num(s.t[gi]), num(mo.mean), num(mo.var), num(dks.back()),
                       num(orders.dk_order[gi])});
    }
    const SlopeEstimate sl = dk_slope(s.n, samples, plan.bootstrap, derive_seed(plan.seed, 0x636f6e73ULL, mi));
    const LineFit mean_fit = tail_fit(s.n, means, s.n.size());
    const LineFit mean_pred = tail_fit(s.n, orders.mean_order, s.n.size());
    const LineFit var_fit = tail_fit(s.n, vars, s.n.size());
    const LineFit var_pred = tail_fit(s.n, orders.variance_order, s.n.size());
    const LineFit dk_pred = tail_fit(s.n, orders.dk_order);
    dk_by_label[tail_label(s.family)] = dks;
    per_model.push_back({{"model", generator_json(plan.models[mi])},
                         {"label", tail_label(s.family)},
                         {"family", family_name(s.family)},
                         {"grid", grid},
                         {"dk_slope", {{"slope", sl.slope}, {"ci_low", sl.lo}, {"ci_high", sl.hi}, {"se", sl.se}}},
                         {"dk_order_slope", dk_pred.slope},
                         {"mean_exponent", mean_fit.slope},
                         {"mean_exponent_predicted", mean_pred.slope},
                         {"variance_exponent", var_fit.slope},
                         {"variance_exponent_predicted", var_pred.slope}});
  }
  json ordering = json::array();
  if (dk_by_label.count("gaussian") && dk_by_label.count("exponential") && dk_by_label.count("heavy")) {
    const std::size_t g = n_ref.size();
    for (std::size_t i = g >= 2 ? g - 2 : 0; i < g; ++i) {
      const double a = dk_by_label["gaussian"][i], b = dk_by_label["exponential"][i], c = dk_by_label["heavy"][i];
      ordering.push_back({{"n", n_ref[i]}, {"gaussian", a}, {"exponential", b}, {"heavy", c}, {"ordered", a < b && b < c}});
    }
  }
  res.report = {{"study", "conditional"}, {"models", per_model}, {"ordering", ordering}, {"warnings", res.warnings}};
  res.files["conditional.csv"] = csv;
  return res;
}

// Rates study

StudyResult run_rates_study(const ExperimentPlan& plan) {
  if (plan.replicates < 2) fail(ErrorKind::Config, "field 'replicates': need at least two replicates");
  const StudySetup s = prepare_study(plan, plan.model);
  StudyResult res;
  std::vector<double> vars;
  std::vector<std::vector<double>> combined;
  for (std::size_t gi = 0; gi < s.n.size(); ++gi) {
    const ReplicateValues rv = simulate_restricted(plan, s, gi);
    combined.push_back(rv.combined(plan.weights));
    vars.push_back(variance(combined.back()));
  }
  std::vector<Vec> thetas;
  for (const AffineFrame& f : s.frames) thetas.push_back(f.theta);
  const RateDiagnostic diag =
      clt_rate_diagnostic(*s.model, thetas, plan.weights, *s.kernel, s.n, s.t, s.r, vars, plan.mc);
  json grid = json::array();
  std::string csv = csv_line({"n", "t", "r", "B_kappa", "h4_norm", "variance", "bound_rate", "theory_rate", "d_K"});
  std::vector<double> dks;
  for (std::size_t i = 0; i < s.n.size(); ++i) {
    dks.push_back(kolmogorov_to_normal(combined[i]));
    grid.push_back({{"n", s.n[i]}, {"t", s.t[i]}, {"r", s.r[i]}, {"B_kappa", diag.b_kappa[i]},
                    {"h4_norm", diag.h4_norm[i]}, {"variance", vars[i]}, {"bound_rate", diag.bound_rate[i]},
                    {"theory_rate", diag.theory_rate[i]}, {"d_K", dks.back()}});
    csv += csv_line({num(s.n[i]), num(s.t[i]), num(s.r[i]), num(diag.b_kappa[i]), num(diag.h4_norm[i]), num(vars[i]),
                     num(diag.bound_rate[i]), num(diag.theory_rate[i]), num(dks.back())});
  }
  const SlopeEstimate sl = dk_slope(s.n, combined, plan.bootstrap, derive_seed(plan.seed, 0x72617465ULL));
  res.report = {{"study", "rates"},
                {"family", family_name(s.family)},
                {"regime", regime_name(s.regime.kind)},
                {"grid", grid},
                {"bound_slope", diag.bound_fit.slope},
                {"theory_slope", diag.theory_fit.slope},
                {"dk_slope", {{"slope", sl.slope}, {"ci_low", sl.lo}, {"ci_high", sl.hi}}}};
  res.files["rates.csv"] = csv;
  return res;
}

// Plumbing studies

std::string points_csv(const PointCloud& cloud) {
  std::string s;
  for (int j = 0; j < cloud.dim; ++j) s += (j ? ",x" : "x") + std::to_string(j);
  s += "\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (int j = 0; j < cloud.dim; ++j) {
      if (j) s += ',';
      s += num(cloud.point(i)[j]);
    }
    s += "\n";
  }
  return s;
}

PointCloud read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open point file '" + path + "'");
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (lineno == 1) continue;  // header
      fail(ErrorKind::Io, path + ": line " + std::to_string(lineno) + " is not numeric");
    }
    if (cloud.dim == 0) cloud.dim = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != cloud.dim)
      fail(ErrorKind::Io, path + ": line " + std::to_string(lineno) + " has the wrong number of columns");
    for (double v : row)
      if (!std::isfinite(v)) fail(ErrorKind::Io, path + ": non-finite coordinate on line " + std::to_string(lineno));
    cloud.coords.insert(cloud.coords.end(), row.begin(), row.end());
  }
  cloud.meta.parent = "file:" + path;
  return cloud;
}

namespace {

json meta_json(const CloudMeta& m, std::size_t size) {
  return {{"seed", m.seed},     {"stream", m.stream},       {"n", m.n},        {"model", m.model},
          {"halfspace", m.halfspace}, {"parent", m.parent}, {"acceptance", m.acceptance}, {"points", size}};
}

PointCloud sample_for_plan(const ExperimentPlan& plan) {
  if (plan.n_grid.empty()) fail(ErrorKind::Config, "field 'n_grid': sampling needs an intensity n");
  const BodyPtr body = make_body(plan.body, plan.dim);
  const DensityModel model(body, plan.model);
  const double n = plan.n_grid.front();
  const double t = plan.t_rule.evaluate({n}, alpha_of(plan.model)).front();
  if (plan.conditional) {
    const Halfspace hs = outer_halfspace(*body, plan.angles.front(), t);
    return sample_conditional(model, n, hs, plan.seed);
  }
  if (plan.raw.contains("sampling") && plan.sampling == SamplingMode::Shell) {
    const RadialTable table(model, t);
    return sample_shell(model, table, n, plan.seed);
  }
  return sample_poisson(model, n, plan.seed);
}

}  // namespace

StudyResult run_sample(const ExperimentPlan& plan) {
  const PointCloud cloud = sample_for_plan(plan);
  StudyResult res;
  res.report = {{"study", "sample"}, {"meta", meta_json(cloud.meta, cloud.size())}};
  res.files["points.csv"] = points_csv(cloud);
  res.files["meta.json"] = meta_json(cloud.meta, cloud.size()).dump(2) + "\n";
  return res;
}

StudyResult run_ustat(const ExperimentPlan& plan) {
  const PointCloud cloud = plan.points.empty() ? sample_for_plan(plan) : read_points_csv(plan.points);
  const KernelPtr h = make_kernel(plan.kernel);
  double r = 1.0;
  if (plan.radius) r = *plan.radius;
  else if (!plan.n_grid.empty()) r = plan.r_rule.evaluate({plan.n_grid.front()}).front();
  else r = plan.r_rule.value;
  ComputeOptions copt;
  copt.budget = plan.tuple_budget;
  copt.threads = plan.threads;
  const StatisticValue v = compute_S(cloud, *h, r, copt);
  StudyResult res;
  res.report = {{"study", "ustat"}, {"kernel", kernel_json(plan.kernel)}, {"points", cloud.size()},
                {"r", r},           {"value", v.value},                 {"tuples", v.tuples}};
  if (plan.raw.contains("angles") && plan.raw.contains("t_rule") && !plan.n_grid.empty()) {
    const BodyPtr body = make_body(plan.body, plan.dim);
    const double t = plan.t_rule.evaluate({plan.n_grid.front()}, alpha_of(plan.model)).front();
    json per = json::array();
    for (const Vec& th : plan.angles) {
      const Halfspace hs = outer_halfspace(*body, th, t);
      const StatisticValue sv = compute_S(restrict_cloud(cloud, hs), *h, r, copt);
      per.push_back({{"theta", vec_json(th)}, {"t", t}, {"value", sv.value}, {"tuples", sv.tuples}});
    }
    res.report["restricted"] = per;
  }
  return res;
}

StudyResult run_limits(const ExperimentPlan& plan) {
  const StudySetup s = prepare_study(plan, plan.model);
  const int k = s.kernel->order();
  const std::size_t m = s.frames.size();
  StudyResult res;
  json records = json::array();
  for (std::size_t a = 0; a < m; ++a) {
    const LimitConstant e = expectation_constant(plan, s, a);
    collect_warnings(res, plan, e);
    records.push_back(to_json(e));
    const auto comps = variance_components(plan, s, a, a);
    for (const auto& [l, c] : comps) {
      collect_warnings(res, plan, c);
      records.push_back(to_json(c));
    }
    records.push_back(to_json(variance_limit(s.family, s.regime.kind, k, comps, s.regime.chi)));
  }
  if (s.family == NormalizerFamily::Heavy)
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b) {
        const auto comps = variance_components(plan, s, a, b);
        LimitConstant c = variance_limit(s.family, s.regime.kind, k, comps, s.regime.chi);
        c.kind = "covariance";
        c.name = "C";
        records.push_back(to_json(c));
      }
  res.report = {{"study", "limits"},
                {"family", family_name(s.family)},
                {"regime", regime_name(s.regime.kind)},
                {"chi", s.regime.chi},
                {"constants", records},
                {"warnings", res.warnings}};
  res.files["constants.json"] = records.dump(2) + "\n";
  return res;
}

StudyResult run_study(const ExperimentPlan& plan) {
  if (plan.study == "moments" || plan.study == "verify") return run_moment_study(plan);
  if (plan.study == "clt") return run_clt_study(plan);
  if (plan.study == "independence") return run_independence_study(plan);
  if (plan.study == "conditional") return run_conditional_study(plan);
  if (plan.study == "rates") return run_rates_study(plan);
  if (plan.study == "sample") return run_sample(plan);
  if (plan.study == "ustat") return run_ustat(plan);
  if (plan.study == "limits") return run_limits(plan);
  fail(ErrorKind::Config, "field 'study': unknown study kind '" + plan.study + "'");
}

void write_artifacts(const StudyResult& result, const ExperimentPlan& plan, const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create output directory '" + out_dir + "'");
  std::vector<std::string> names;
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(fs::path(out_dir) / name, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write '" + name + "'");
    out << content;
    names.push_back(name);
  };
  const std::string study = plan.study == "verify" ? "moments" : plan.study;
  if (study != "sample") write(study + "_report.json", result.report.dump(2) + "\n");
  for (const auto& [name, content] : result.files) write(name, content);
  const json manifest = {{"study", plan.study},
                         {"seed", plan.seed},
                         {"version", kVersion},
                         {"config_hash", hex64(hash_json(plan.raw))},
                         {"files", names},
                         {"warnings", result.warnings}};
  std::ofstream out(fs::path(out_dir) / "manifest.json");
  if (!out) fail(ErrorKind::Io, "cannot write manifest");
  out << manifest.dump(2) << "\n";
}

}  // namespace hsu
