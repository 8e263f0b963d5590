// Acceptance suite: one PASS/FAIL line per criterion.
//   hsu_acceptance            run all
//   hsu_acceptance 4 7        run a subset
//   hsu_acceptance --json     also dump the study reports to stderr

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsu/config.hpp"
#include "hsu/errors.hpp"
#include "hsu/harness.hpp"
#include "hsu/limits.hpp"
#include "hsu/sampling.hpp"
#include "hsu/ustat.hpp"

using namespace hsu;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
bool g_dump = false;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back((ok ? "" : "!") + what);
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

StudyResult run_plan(const std::string& text) {
  StudyResult r = run_study(parse_plan(text, "<acceptance>"));
  if (g_dump) std::fprintf(stderr, "%s\n", r.report.dump(1).c_str());
  return r;
}

// 1. geometry

Outcome geometry() {
  Outcome o;
  for (const char* tag : {"ball", "lp:4:diag=1.5,0.75", "egg2d"}) {
    auto b = make_body(tag, 2);
    Rng rng = make_rng(101);
    double homog = 0, euler = 0, sup = 0, frame = 0, pos = 0;
    for (int i = 0; i < 400; ++i) {
      const Vec x = v2(standard_normal(rng), standard_normal(rng));
      const double a = 0.05 + 10 * uniform_open(rng);
      const double gx = b->gauge(x);
      homog = std::max(homog, std::abs(b->gauge(a * x) - a * gx) / (a * gx));
      euler = std::max(euler, std::abs(b->derivatives(x).gradient.dot(x) - gx) / gx);
    }
    for (int i = 0; i < 16; ++i) {
      // offset keeps the egg seam off the probe set
      const Vec th = direction_from_angle(0.1 + 2 * kPi * i / 16);
      const SupportResult s = support(*b, th);
      sup = std::max({sup, std::abs(b->gauge(s.point) - 1), std::abs(s.point.dot(th) - s.zeta),
                      (b->derivatives(s.point).gradient - th / s.zeta).norm()});
      const AffineFrame f = initial_transformation(*b, th);
      const Vec grad = b->derivatives(f.p).gradient;
      frame = std::max({frame, (f.A * v2(0, 1) - f.p).norm(), std::abs(std::abs(f.A.determinant()) - f.z) / f.z});
      for (int j = 0; j < 50; ++j) {
        const Vec y = v2(standard_normal(rng), standard_normal(rng));
        frame = std::max(frame, std::abs((f.A_inv * y)[1] - grad.dot(y)) / (1 + y.norm()));
      }
      pos = std::max(pos, check_initial_position(*b, f, {1e-3}).worst_deviation[0]);
    }
    const bool ok = homog < 1e-10 && euler < 1e-6 && sup < 1e-6 && frame < 1e-6 && pos < 1e-2;
    o.require(ok, std::string(tag) + ": homog " + fmt("%.1e", homog) + " euler " + fmt("%.1e", euler) + " support " +
                      fmt("%.1e", sup) + " frame " + fmt("%.1e", frame) + " position " + fmt("%.1e", pos));
  }
  return o;
}

// 2. sampler fidelity

Outcome sampler() {
  Outcome o;
  auto ball = make_body("ball", 2);
  struct Preset {
    const char* psi;
    std::function<double(double)> cdf;
  };
  const Preset presets[] = {{"t", [](double s) { return 1 - std::exp(-s) * (1 + s); }},
                            {"t^2/2", [](double s) { return 1 - std::exp(-s * s / 2); }}};
  std::uint64_t seed = 21;
  for (const Preset& p : presets) {
    GeneratorSpec g;
    g.psi = p.psi;
    DensityModel m(ball, g);
    const PointCloud c = sample_poisson(m, 1e5, seed++);
    std::vector<double> s;
    for (std::size_t i = 0; i < c.size(); ++i) s.push_back(ball->gauge_raw(c.point(i)));
    const double ks = ks_statistic(s, p.cdf);
    o.require(ks < 0.01, std::string("KS psi=") + p.psi + " " + fmt("%.4f", ks));
  }
  // cloud sizes of 1000 replicates against Poisson(mean)
  GeneratorSpec g;
  DensityModel m(ball, g);
  const double mean = 40;
  const int reps = 1000;
  std::vector<int> count(reps);
  for (int i = 0; i < reps; ++i) count[i] = static_cast<int>(sample_poisson(m, mean, 77, i).size());
  auto pmf = [&](int k) { return std::exp(k * std::log(mean) - mean - std::lgamma(k + 1.0)); };
  // bins of expected mass >= 25 each
  std::vector<int> upper;
  double acc = 0;
  for (int k = 0; k < 200; ++k) {
    acc += pmf(k) * reps;
    if (acc >= 25) {
      upper.push_back(k);
      acc = 0;
    }
  }
  upper.back() = 1 << 30;
  std::vector<double> exp_b(upper.size(), 0), obs_b(upper.size(), 0);
  auto bin = [&](int k) {
    std::size_t b = 0;
    while (k > upper[b]) ++b;
    return b;
  };
  for (int k = 0; k < 400; ++k) exp_b[bin(k)] += pmf(k) * reps;
  for (int c : count) obs_b[bin(c)] += 1;
  double chi2 = 0;
  for (std::size_t b = 0; b < upper.size(); ++b) chi2 += std::pow(obs_b[b] - exp_b[b], 2) / exp_b[b];
  const double pval = chi_square_survival(chi2, upper.size() - 1.0);
  o.require(pval > 0.01, "Poisson counts chi2 " + fmt("%.2f", chi2) + " on " + std::to_string(upper.size() - 1) +
                             " dof, p = " + fmt("%.3f", pval));
  return o;
}

// 3. grid enumeration against brute force

Outcome oracle_equality() {
  Outcome o;
  KernelSpec edge, tri, path;
  tri.kind = "vr";
  tri.k = 2;
  path.kind = "noninduced";
  path.k = 2;
  path.edges = {{0, 1}, {1, 2}};
  Rng rng = make_rng(303);
  for (const KernelSpec& ks : {edge, tri, path}) {
    auto h = make_kernel(ks);
    int equal = 0;
    for (int c = 0; c < 200; ++c) {
      PointCloud cloud;
      cloud.dim = 2;
      const int size = static_cast<int>(uniform_open(rng) * 13);
      for (int i = 0; i < 2 * size; ++i) cloud.coords.push_back(2 * uniform_open(rng));
      const double r = 0.2 + 0.8 * uniform_open(rng);
      equal += compute_S(cloud, *h, r).value == compute_S_bruteforce(cloud, *h, r).value;
    }
    o.require(equal == 200, ks.kind + ": " + std::to_string(equal) + "/200 equal");
  }
  return o;
}

// 4. first moment against the Mecke quadrature

Outcome mecke() {
  Outcome o;
  auto ball = make_body("ball", 2);
  GeneratorSpec g;
  DensityModel m(ball, g);
  auto edge = make_kernel(KernelSpec{});
  const double n = 1e4, t = 4, r = 1;
  const Vec up = v2(0, 1);
  const Halfspace hs = outer_halfspace(*ball, up, t);
  const RadialTable table(m, t);
  const int reps = 2000;
  std::vector<double> s(reps);
  for (int i = 0; i < reps; ++i)
    s[i] = compute_S(restrict_cloud(sample_shell(m, table, n, 404, i), hs), *edge, r).value;
  const double mu = mean(s), se = std::sqrt(variance(s) / reps);
  const double q = mecke_edge_mean(m, up, n, t, r);
  const double z = (mu - q) / se;
  o.require(std::abs(z) <= 3, "empirical " + fmt("%.3f", mu) + " +- " + fmt("%.3f", se) + ", quadrature " +
                                  fmt("%.3f", q) + ", z = " + fmt("%.2f", z));
  return o;
}

// 5. moment asymptotics

Outcome moments() {
  Outcome o;
  const StudyResult r = run_plan(R"({"study":"verify","seed":505,"body":"ball","model":{"kind":"light","psi":"t"},
    "kernel":{"kind":"edge"},"angles":[1.5707963267948966,0.0],"n_grid":[1e5,1e9,1e13,1e17,1e21],
    "t_rule":{"kind":"log","c":0.9},"r_rule":{"kind":"const","value":1},"replicates":60000,
    "sampling":"shell"})");
  const json& rep = r.report;
  o.require(rep["regime"] == "dense", "regime " + rep["regime"].get<std::string>());
  const json& top = rep["grid"].back();
  for (const json& a : top["angles"]) {
    const double mr = a["mean_ratio"], vr = a["variance_ratio"];
    o.require(std::abs(mr - 1) <= 0.1 && std::abs(vr - 1) <= 0.1,
              "angle " + std::to_string(a["angle"].get<int>()) + ": mean ratio " + fmt("%.4f", mr) +
                  ", variance ratio " + fmt("%.4f", vr) + ", mecke z " + fmt("%.2f", a["mecke_z"].get<double>()));
  }
  std::string trace;
  for (const json& row : rep["grid"]) trace += fmt(" %.4f", row["covariances"][0]["normalized"].get<double>());
  const json& trend = rep["covariance_trends"][0];
  const double fin = trend["final"];
  o.require(std::abs(fin) < 0.05 && trend["monotone"].get<bool>(),
            "normalized covariance at right angles:" + trace + (trend["monotone"].get<bool>() ? " (|cov| non-increasing within 2 se)" : " (|cov| grows beyond 2 se)"));
  return o;
}

// 6. CLT per tail class

Outcome clt() {
  Outcome o;
  struct Case {
    const char* label;
    std::string plan;
  };
  const Case cases[] = {
      {"exponential", R"({"study":"clt","seed":606,"model":{"kind":"light","psi":"t"},"kernel":{"kind":"edge"},
        "n_grid":[10,31.6,100,316,1000,3162,10000,31623,100000],"t_rule":{"kind":"log","c":0.5},
        "r_rule":{"kind":"const","value":1},"replicates":4000,"bootstrap":500})"},
      {"gaussian", R"({"study":"clt","seed":607,"model":{"kind":"light","psi":"t^2/2"},"kernel":{"kind":"edge"},
        "n_grid":[10,100,1000,10000,31623,100000,316228,1000000],"t_rule":{"kind":"sqrt_log","c":0.5},
        "r_rule":{"kind":"const","value":0.5},"replicates":4000,"bootstrap":500})"},
      {"heavy", R"({"study":"clt","seed":608,"model":{"kind":"heavy","alpha":5},"kernel":{"kind":"edge"},
        "n_grid":[10,31.6,100,316,1000,3162,10000,31623,100000],"t_rule":{"kind":"power","value":1,"c":0.5},
        "r_rule":{"kind":"const","value":0.3},"replicates":4000,"bootstrap":500})"}};
  for (const Case& c : cases) {
    const StudyResult r = run_plan(c.plan);
    const double dk = r.report["final_d_K"];
    const json& sl = r.report["slope"];
    const double lo = sl["ci_low"], hi = sl["ci_high"], slope = sl["slope"];
    o.require(dk < 0.05 && slope < 0 && hi < 0,
              std::string(c.label) + " (" + r.report["family"].get<std::string>() + ", " +
                  r.report["regime"].get<std::string>() + "): final d_K " + fmt("%.4f", dk) + ", slope " +
                  fmt("%.3f", slope) + " CI [" + fmt("%.3f", lo) + ", " + fmt("%.3f", hi) + "]");
  }
  return o;
}

// 7. asymptotic independence

Outcome independence() {
  Outcome o;
  const StudyResult light = run_plan(R"({"study":"independence","seed":707,"model":{"kind":"light","psi":"t"},
    "kernel":{"kind":"edge"},"angles":[1.5707963267948966,0.7853981633974483],"thresholds":[0,0],
    "n_grid":[10,100,1000,10000,100000,1000000],"t_rule":{"kind":"log","c":0.5},"r_rule":{"kind":"const","value":1},
    "replicates":4000,"bootstrap":200})");
  std::string trace;
  for (const json& row : light.report["grid"]) trace += fmt(" %.4f", row["gap"].get<double>());
  const double fin = light.report["final_gap"];
  o.require(fin < 0.05 && light.report["decreasing"].get<bool>(), "light gaps:" + trace);
  const StudyResult heavy = run_plan(R"({"study":"independence","seed":708,
    "model":{"kind":"heavy","alpha":5,"profile":"pareto"},
    "kernel":{"kind":"edge"},"angles":[1.5707963267948966,1.3707963267948966],"thresholds":[0,0],
    "n_grid":[100000,1000000,10000000],"t_rule":{"kind":"power","value":1,"c":0.5},
    "r_rule":{"kind":"power","value":0.75,"exponent":-0.25},
    "replicates":4000,"bootstrap":200})");
  trace.clear();
  for (const json& row : heavy.report["grid"]) trace += fmt(" %.4f", row["gap"].get<double>());
  const json& top = heavy.report["grid"].back();
  const double minimum = heavy.report["min_gap"], z = top["correlation_z"];
  o.require(minimum > 0.1, "heavy gaps:" + trace);
  o.require(std::abs(z) <= 3, "heavy correlation " + fmt("%.3f", top["correlation"].get<double>()) + " vs predicted " +
                                  fmt("%.3f", top["predicted_correlation"].get<double>()) + ", z = " + fmt("%.2f", z));
  return o;
}

// 8. conditional rates

Outcome conditional() {
  Outcome o;
  const StudyResult r = run_plan(R"({"study":"conditional","seed":808,"kernel":{"kind":"edge"},
    "models":[{"kind":"light","psi":"t^2/2"},{"kind":"light","psi":"t"},{"kind":"heavy","alpha":5}],
    "n_grid":[16,32,64,128,256],"t_rule":{"kind":"log","c":1},"r_rule":{"kind":"const","value":0.25},
    "replicates":20000,"bootstrap":500})");
  for (const json& m : r.report["models"]) {
    const std::string label = m["label"];
    const double me = m["mean_exponent"], mp = m["mean_exponent_predicted"];
    const json& sl = m["dk_slope"];
    std::string line = label + ": d_K slope " + fmt("%.3f", sl["slope"].get<double>()) + " [" +
                       fmt("%.3f", sl["ci_low"].get<double>()) + ", " + fmt("%.3f", sl["ci_high"].get<double>()) +
                       "], mean exponent " + fmt("%.3f", me) + " vs " + fmt("%.3f", mp);
    bool ok = true;
    if (label == "gaussian") ok = sl["slope"].get<double>() >= -0.65 && sl["slope"].get<double>() <= -0.35;
    if (label == "gaussian" || label == "exponential") ok = ok && std::abs(me - mp) <= 0.15;
    o.require(ok, line);
  }
  bool ordered = r.report["ordering"].size() == 2;
  std::string trace;
  for (const json& row : r.report["ordering"]) {
    ordered = ordered && row["ordered"].get<bool>();
    trace += " n=" + fmt("%.0f", row["n"].get<double>()) + ": " + fmt("%.4f", row["gaussian"].get<double>()) + " < " +
             fmt("%.4f", row["exponential"].get<double>()) + " < " + fmt("%.4f", row["heavy"].get<double>());
  }
  o.require(ordered, "ordering" + trace);
  return o;
}

// 9. constant stability across seeds

Outcome stability() {
  Outcome o;
  auto ball = make_body("ball", 2);
  auto egg = make_body("egg2d", 2);
  auto edge = make_kernel(KernelSpec{});
  KernelSpec ts;
  ts.kind = "vr";
  ts.k = 2;
  auto tri = make_kernel(ts);
  const AffineFrame fb = initial_transformation(*ball, direction_from_angle(0.7));
  const AffineFrame fe = initial_transformation(*egg, direction_from_angle(2.0));
  const Vec a = direction_from_angle(1.2), b = direction_from_angle(1.5);
  using Make = std::function<LimitConstant(const McOptions&)>;
  const std::vector<std::pair<std::string, Make>> constants = {
      {"E light", [&](const McOptions& m) { return expectation_limit_light(*tri, fe, 1.0, 1.0, m); }},
      {"I_{2,1}", [&](const McOptions& m) { return integral_Ikl(*tri, fe, 1, 1.0, 1.0, m); }},
      {"I_{1,2}", [&](const McOptions& m) { return integral_Ikl(*edge, fb, 2, 2.0, 1.0, m); }},
      {"E lite", [&](const McOptions& m) { return expectation_limit_lite(*tri, fe, 1.0, 1.0, m); }},
      {"I*_{1,1}", [&](const McOptions& m) { return integral_Istar_kl(*edge, fe, 1, 1.0, 1.0, m); }},
      {"H_{2,1}", [&](const McOptions& m) { return integral_Hkl(*tri, *egg, 1, 5.0, a, a, m); }},
      {"H_{2,2}", [&](const McOptions& m) { return integral_Hkl(*tri, *egg, 2, 5.0, a, b, m); }},
      {"C(a,b)", [&](const McOptions& m) {
         return covariance_function(*tri, *egg, 5.0, RegimeKind::Critical, 2.0, a, b, m);
       }}};
  for (std::size_t c = 0; c < constants.size(); ++c) {
    std::vector<double> v, se;
    for (std::uint64_t s = 1; s <= 8; ++s) {
      McOptions m;
      m.seed = 9000 + s;
      m.samples = 1u << 18;
      const LimitConstant lc = constants[c].second(m);
      v.push_back(lc.value);
      se.push_back(lc.se);
    }
    if (*std::min_element(se.begin(), se.end()) <= 0) {
      o.require(false, constants[c].first + " has zero standard error; the seed check would be vacuous");
      continue;
    }
    // each seed against the pooled estimate of the other seven
    double worst_c = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      double wsum = 0, wv = 0;
      for (std::size_t j = 0; j < v.size(); ++j)
        if (j != i) {
          wsum += 1 / (se[j] * se[j]);
          wv += v[j] / (se[j] * se[j]);
        }
      const double z = std::abs(v[i] - wv / wsum) / std::sqrt(se[i] * se[i] + 1 / wsum);
      worst_c = std::max(worst_c, z);
    }
    o.require(worst_c <= 3, constants[c].first + " " + fmt("%.5g", v[0]) + " worst z " + fmt("%.2f", worst_c));
  }
  GeneratorSpec hv;
  hv.kind = TailKind::Heavy;
  DensityModel heavy(ball, hv);
  const PotterReport pr = potter_check(heavy, 0.1);
  o.require(pr.pass, "Potter " + hv.profile + " alpha 5, eps 0.1: " + (pr.pass ? "pass" : "fail") + ", t0 " +
                         (pr.t0 ? fmt("%.3g", *pr.t0) : std::string("none")));
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "geometry suite", 60, geometry},
    {2, "sampler fidelity", 120, sampler},
    {3, "oracle equality", 60, oracle_equality},
    {4, "Mecke check", 300, mecke},
    {5, "moment asymptotics", 900, moments},
    {6, "CLT per tail class", 5400, clt},
    {7, "asymptotic independence", 1800, independence},
    {8, "conditional rates", 1800, conditional},
    {9, "limit-constant stability", 1800, stability},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--json")) g_dump = true;
    else only.insert(std::atoi(argv[i]));
  }
  int failed = 0;
  for (const Criterion& c : kCriteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("error: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs <= c.budget_s, fmt("%.1f s", secs) + " of " + fmt("%.0f s", c.budget_s));
    std::printf("criterion %d %s: %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name);
    for (const std::string& n : o.notes)
      std::printf("    %s %s\n", n.rfind('!', 0) == 0 ? "x" : "-", n.rfind('!', 0) == 0 ? n.c_str() + 1 : n.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d criteria failed\n", failed);
  return failed ? 1 : 0;
}
