#include "hsu/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "hsu/errors.hpp"

namespace hsu {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2 * kPi);
  if (a < 0) a += 2 * kPi;
  return a - kPi;
}

}  // namespace

DensityModel::DensityModel(BodyPtr body, GeneratorSpec spec) : body_(std::move(body)), spec_(std::move(spec)) {
  if (!body_) fail(ErrorKind::InvalidInput, "density model needs a body");
  const int d = body_->dim();
  if (spec_.kind == TailKind::Light) {
    if (spec_.psi == "table") {
      if (spec_.table_t.size() != spec_.table_psi.size() || spec_.table_t.size() < 3)
        fail(ErrorKind::Config, "tabulated psi needs at least three (t, psi) pairs");
      for (std::size_t i = 1; i < spec_.table_psi.size(); ++i)
        if (!(spec_.table_psi[i] > spec_.table_psi[i - 1]))
          fail(ErrorKind::Config, "tabulated psi must be strictly increasing (psi' > 0)");
      table_ = Pchip(spec_.table_t, spec_.table_psi);
      const auto& x = spec_.table_t;
      const auto& y = spec_.table_psi;
      const std::size_t n = x.size();
      table_lo_slope_ = (y[1] - y[0]) / (x[1] - x[0]);
      table_hi_slope_ = (y[n - 1] - y[n - 2]) / (x[n - 1] - x[n - 2]);
    } else if (spec_.psi != "t" && spec_.psi != "t^2/2") {
      fail(ErrorKind::Config, "unknown psi '" + spec_.psi + "' (expected \"t\", \"t^2/2\" or a table)");
    }
  } else {
    if (!(spec_.alpha > d) || !std::isfinite(spec_.alpha))
      fail(ErrorKind::Config, "heavy generator needs a tail index alpha > d");
    if (spec_.profile != "one-plus" && spec_.profile != "pareto")
      fail(ErrorKind::Config, "unknown heavy profile '" + spec_.profile + "'");
  }
  volume_ = body_->volume();
  const double log_mass = std::log(d * volume_) + log_radial_tail(0.0);
  log_c_ = -log_mass;
  c_ = std::exp(log_c_);
  if (!std::isfinite(log_c_)) fail(ErrorKind::Numeric, "normalizing constant is not finite");
}

std::string DensityModel::tag() const {
  std::ostringstream os;
  if (spec_.kind == TailKind::Light) os << "light:" << spec_.psi;
  else os << "heavy:" << spec_.profile << ":alpha=" << spec_.alpha;
  return os.str();
}

double DensityModel::log_g0(double s) const {
  if (spec_.kind == TailKind::Heavy) {
    if (spec_.profile == "pareto") return s < 1.0 ? 0.0 : -spec_.alpha * std::log(s);
    return -spec_.alpha * std::log1p(s);
  }
  return -psi(s);
}

double DensityModel::psi(double t) const {
  if (spec_.kind != TailKind::Light) fail(ErrorKind::State, "psi is only defined for light generators");
  if (spec_.psi == "t") return t;
  if (spec_.psi == "t^2/2") return 0.5 * t * t;
  const auto& x = table_.knots();
  const auto& y = table_.values();
  if (t < x.front()) return y.front() + table_lo_slope_ * (t - x.front());
  if (t > x.back()) return y.back() + table_hi_slope_ * (t - x.back());
  return table_(t);
}

double DensityModel::psi_prime(double t) const {
  if (spec_.kind != TailKind::Light) fail(ErrorKind::State, "psi is only defined for light generators");
  if (spec_.psi == "t") return 1.0;
  if (spec_.psi == "t^2/2") return t;
  const auto& x = table_.knots();
  if (t < x.front()) return table_lo_slope_;
  if (t > x.back()) return table_hi_slope_;
  return table_.derivative(t);
}

double DensityModel::q(double t) const {
  const double at = a(t);
  return std::pow(at * t, 0.5 * (dim() - 1)) * at;
}

double DensityModel::density(const Vec& x) const { return std::exp(log_g(body_->gauge(x))); }

double DensityModel::log_radial_tail(double s0) const {
  if (!(s0 >= 0.0) || !std::isfinite(s0)) fail(ErrorKind::InvalidInput, "radial tail start must be finite and >= 0");
  const int d = dim();
  const double ref = std::max(s0, 1.0);
  double scale = ref;
  if (spec_.kind == TailKind::Light) scale = std::min(a(ref), ref);
  const double offset = log_g0(s0) + (d - 1) * std::log(ref);
  auto f = [&](double y) {
    const double s = s0 + scale * y;
    if (s <= 0.0) return 0.0;
    return std::exp(log_g0(s) + (d - 1) * std::log(s) - offset);
  };
  // log_g0(s) - offset cancels; its rounding noise bounds the attainable accuracy.
  const double tol = std::max(1e-12, 64 * std::numeric_limits<double>::epsilon() * std::abs(offset));
  double value = 0.0;
  // A kink of the pareto profile at s = 1 is handled by splitting there.
  if (spec_.kind == TailKind::Heavy && spec_.profile == "pareto" && s0 < 1.0) {
    const double y1 = (1.0 - s0) / scale;
    value = integrate(f, 0.0, y1, tol) + integrate(f, y1, kInf, tol);
  } else {
    value = integrate(f, 0.0, 1.0, tol) + integrate(f, 1.0, kInf, tol);
  }
  if (!(value > 0.0)) return -kInf;
  return offset + std::log(scale * value);
}

double DensityModel::radial_mass() const {
  return dim() * volume_ * std::exp(log_c_ + log_radial_tail(0.0));
}

// Limits

const char* limit_class_name(LimitClass c) noexcept {
  switch (c) {
    case LimitClass::Zero: return "zero";
    case LimitClass::Finite: return "finite";
    case LimitClass::Infinite: return "infinite";
  }
  return "unknown";
}

SequenceLimit classify_limit(const std::vector<double>& seq) {
  if (seq.empty()) fail(ErrorKind::InvalidInput, "cannot classify an empty sequence");
  for (double v : seq)
    if (std::isnan(v)) fail(ErrorKind::Classification, "sequence contains NaN");
  const double last = seq.back();
  if (last == 0.0) return {LimitClass::Zero, 0.0};
  if (std::isinf(last)) return {LimitClass::Infinite, kInf};
  const std::size_t n = seq.size();
  if (n >= 3) {
    const double v1 = seq[n - 3], v2 = seq[n - 2], v3 = seq[n - 1];
    if (v1 > v2 && v2 > v3 && std::abs(v3) < 1e-4) return {LimitClass::Zero, 0.0};
    if (v1 < v2 && v2 < v3 && v3 > 1e4) return {LimitClass::Infinite, kInf};
  }
  if (n >= 4) {
    // Alternating differences which do not shrink mean there is no limit.
    int changes = 0;
    for (std::size_t i = 2; i < n; ++i) {
      const double d1 = seq[i - 1] - seq[i - 2], d2 = seq[i] - seq[i - 1];
      if (d1 * d2 < 0.0) ++changes;
    }
    const double last_swing = std::abs(seq[n - 1] - seq[n - 2]);
    const double prev_swing = std::abs(seq[n - 2] - seq[n - 3]);
    const double scale = std::max(std::abs(last), 1e-300);
    if (changes >= 2 && static_cast<std::size_t>(changes) + 2 >= n && last_swing > 1e-3 * scale &&
        last_swing >= 0.5 * prev_swing)
      fail(ErrorKind::Classification, "sequence oscillates without a limit; supply an override");
  }
  return {LimitClass::Finite, last};
}

namespace {

SequenceLimit from_value(double v) {
  if (v == 0.0) return {LimitClass::Zero, 0.0};
  if (std::isinf(v)) return {LimitClass::Infinite, kInf};
  return {LimitClass::Finite, v};
}

}  // namespace

TailParams tail_params(const DensityModel& model, const std::vector<double>& t_seq, const std::vector<double>& r_seq,
                       const TailOverride& over) {
  if (t_seq.empty()) fail(ErrorKind::InvalidInput, "threshold sequence is empty");
  for (std::size_t i = 0; i < t_seq.size(); ++i) {
    if (!(t_seq[i] > 0.0) || !std::isfinite(t_seq[i])) fail(ErrorKind::InvalidInput, "thresholds must be positive");
    if (i > 0 && !(t_seq[i] > t_seq[i - 1]))
      fail(ErrorKind::InvalidInput, "threshold sequence must be strictly increasing: t_n must diverge");
  }
  TailParams out;
  out.t = t_seq;
  if (r_seq.empty()) fail(ErrorKind::InvalidInput, "contact-radius sequence is empty");
  if (r_seq.size() != 1 && r_seq.size() != t_seq.size())
    fail(ErrorKind::InvalidInput, "radius sequence must have one entry or one per threshold");
  for (std::size_t i = 0; i < t_seq.size(); ++i) {
    const double r = r_seq.size() == 1 ? r_seq[0] : r_seq[i];
    if (!(r > 0.0) || !std::isfinite(r)) fail(ErrorKind::InvalidInput, "radii must be positive");
    out.r.push_back(r);
  }
  out.r_limit = classify_limit(out.r).value;
  if (model.kind() == TailKind::Heavy) {
    out.heavy = true;
    out.alpha = model.alpha();
    return out;
  }
  for (double t : t_seq) {
    out.a.push_back(model.a(t));
    out.b.push_back(model.b(t));
    out.q.push_back(model.q(t));
  }
  const std::string& psi = model.spec().psi;
  if (over.xi) {
    out.xi = from_value(*over.xi);
  } else if (psi == "t") {
    out.xi = {LimitClass::Finite, 1.0};
    out.xi_analytic = true;
  } else if (psi == "t^2/2") {
    out.xi = {LimitClass::Zero, 0.0};
    out.xi_analytic = true;
  } else {
    out.xi = classify_limit(out.a);
  }
  if (over.beta) out.beta = from_value(*over.beta);
  else if (psi == "t") out.beta = {LimitClass::Infinite, kInf};
  else if (psi == "t^2/2") out.beta = {LimitClass::Finite, 1.0};
  else out.beta = classify_limit(out.b);
  return out;
}

// Halfspace mass

double gauge_power_integral(const RotundBody& body, const Vec& theta1_in, const Vec& theta2_in, double exponent,
                            std::uint64_t seed, std::size_t samples, double* se) {
  const int d = body.dim();
  if (!(exponent > d)) fail(ErrorKind::InvalidInput, "gauge power integral needs exponent > d");
  const Vec t1 = normalize_direction(theta1_in), t2 = normalize_direction(theta2_in);
  if (se) *se = 0.0;
  if ((t1 + t2).norm() < 1e-12) return 0.0;
  const double l1 = support_function(body, t1), l2 = support_function(body, t2);
  // For x = s w with w on the boundary, x lies in both halfspaces iff s >= s_min(w).
  if (d == 2) {
    const double phi1 = std::atan2(t1[1], t1[0]);
    const double delta = wrap_angle(std::atan2(t2[1], t2[0]) - phi1);
    const double lo = phi1 + std::max(-kPi / 2, delta - kPi / 2);
    const double hi = phi1 + std::min(kPi / 2, delta + kPi / 2);
    if (!(hi > lo)) return 0.0;
    auto f = [&](double phi) {
      const double u[2] = {std::cos(phi), std::sin(phi)};
      const double c1 = t1[0] * u[0] + t1[1] * u[1], c2 = t2[0] * u[0] + t2[1] * u[1];
      if (c1 <= 0.0 || c2 <= 0.0) return 0.0;
      const double g = body.gauge_raw(u);
      const double smin = std::max(l1 * g / c1, l2 * g / c2);
      return std::pow(smin, d - exponent) / (g * g) / (exponent - d);
    };
    std::vector<double> cuts = {lo, hi};
    for (const Vec& t : {t1, t2}) {
      const Vec p = support_point(body, t);
      double a = phi1 + wrap_angle(std::atan2(p[1], p[0]) - phi1);
      if (a > lo && a < hi) cuts.push_back(a);
    }
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      if (cuts[i + 1] > cuts[i]) total += integrate(f, cuts[i], cuts[i + 1], 1e-11);
    return total;
  }
  Rng rng = make_rng(seed, 0x6a696e74ULL);
  std::vector<double> vals(samples);
  Vec w(d);
  for (std::size_t s = 0; s < samples; ++s) {
    sample_cone_point(body, rng, w.data());
    const double c1 = t1.dot(w), c2 = t2.dot(w);
    if (c1 <= 0.0 || c2 <= 0.0) {
      vals[s] = 0.0;
      continue;
    }
    const double smin = std::max(l1 / c1, l2 / c2);
    vals[s] = std::pow(smin, d - exponent);
  }
  const double factor = d * body.volume() / (exponent - d);
  if (se) *se = factor * std::sqrt(variance(vals) / static_cast<double>(samples));
  return factor * mean(vals);
}

HalfspaceMass halfspace_mass(const DensityModel& model, const AffineFrame& frame, double t) {
  if (!(t >= 1.0) || !std::isfinite(t)) fail(ErrorKind::InvalidInput, "halfspace scale must be >= 1");
  const RotundBody& body = model.body();
  const int d = body.dim();
  HalfspaceMass out;
  double width = 1.0;  // angular concentration scale around p(theta)
  if (model.kind() == TailKind::Light) {
    out.log_asymptotic = 0.5 * (d - 1) * std::log(2 * kPi) + std::log(frame.z) + model.log_g(t) + std::log(model.q(t));
    width = std::sqrt(model.a(t) / t);
  } else {
    const double j = gauge_power_integral(body, frame.theta, frame.theta, model.alpha());
    out.log_asymptotic = model.log_g(t) + d * std::log(t) + std::log(j);
  }
  out.asymptotic = std::exp(out.log_asymptotic);

  const Vec& theta = frame.theta;
  const double level = frame.zeta * t;
  // rho(tH) = C int over directions of gamma(u)^{-d} int_{s0}^inf g0(s) s^{d-1} ds,
  // s0 = t L gamma(u) / <theta, u>.
  if (d == 2) {
    const double phi_t = std::atan2(theta[1], theta[0]);
    const double eta_p = wrap_angle(std::atan2(frame.p[1], frame.p[0]) - phi_t);
    auto f = [&](double eta) {
      const double phi = phi_t + eta;
      const double u[2] = {std::cos(phi), std::sin(phi)};
      const double c = theta[0] * u[0] + theta[1] * u[1];
      if (c <= 0.0) return 0.0;
      const double g = body.gauge_raw(u);
      const double s0 = level * g / c;
      const double lt = model.log_radial_tail(s0);
      return std::exp(model.log_c() + lt - 2.0 * std::log(g) - out.log_asymptotic);
    };
    std::vector<double> cuts = {-kPi / 2, kPi / 2, eta_p};
    for (double m : {1.0, 5.0, 25.0}) {
      const double delta = m * width;
      if (eta_p - delta > -kPi / 2) cuts.push_back(eta_p - delta);
      if (eta_p + delta < kPi / 2) cuts.push_back(eta_p + delta);
    }
    std::sort(cuts.begin(), cuts.end());
    double ratio = 0.0, err = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      if (!(cuts[i + 1] > cuts[i])) continue;
      double e = 0.0;
      ratio += integrate(f, cuts[i], cuts[i + 1], 1e-10, &e);
      err += e;
    }
    if (!(ratio > 0.0)) fail(ErrorKind::Numeric, "halfspace mass quadrature returned a non-positive value");
    out.log_numeric = out.log_asymptotic + std::log(ratio);
    out.numeric = std::exp(out.log_numeric);
    out.numeric_error = err / ratio;
    return out;
  }
  Rng rng = make_rng(0x6d617373ULL, static_cast<std::uint64_t>(t * 1e6));
  const std::size_t samples = 1u << 16;
  std::vector<double> vals(samples);
  Vec w(d);
  for (std::size_t s = 0; s < samples; ++s) {
    sample_cone_point(body, rng, w.data());
    const double c = theta.dot(w);
    vals[s] = c <= 0.0 ? 0.0 : std::exp(model.log_c() + model.log_radial_tail(level / c) - out.log_asymptotic);
  }
  const double ratio = d * model.volume() * mean(vals);
  if (!(ratio > 0.0)) fail(ErrorKind::Numeric, "halfspace mass Monte Carlo found no mass");
  out.log_numeric = out.log_asymptotic + std::log(ratio);
  out.numeric = std::exp(out.log_numeric);
  out.numeric_error = std::sqrt(variance(vals) / samples) / mean(vals);
  return out;
}

// Normalizers

const char* regime_name(RegimeKind r) noexcept {
  switch (r) {
    case RegimeKind::Sparse: return "sparse";
    case RegimeKind::Critical: return "critical";
    case RegimeKind::Dense: return "dense";
  }
  return "unknown";
}

NormalizerFamily normalizer_family(const DensityModel& model, const TailParams& tail) {
  if (model.kind() == TailKind::Heavy) return NormalizerFamily::Heavy;
  if (tail.xi.cls != LimitClass::Zero) return NormalizerFamily::LightXi;
  if (tail.beta.cls == LimitClass::Infinite)
    fail(ErrorKind::Config, "the regime xi = 0 with beta = infinity is not covered");
  return NormalizerFamily::Lite;
}

double regime_driver(const DensityModel& model, NormalizerFamily family, double n, double t, double r) {
  if (family == NormalizerFamily::Lite) return n * model.g(t) * model.q(t);
  return n * model.g(t) * std::pow(r, model.dim());
}

Regime classify_regime(const DensityModel& model, NormalizerFamily family, const std::vector<double>& n,
                       const std::vector<double>& t, const std::vector<double>& r) {
  if (n.size() != t.size() || (r.size() != 1 && r.size() != n.size()) || n.empty())
    fail(ErrorKind::InvalidInput, "regime inputs must be equally long sequences");
  std::vector<double> drv;
  for (std::size_t i = 0; i < n.size(); ++i)
    drv.push_back(regime_driver(model, family, n[i], t[i], r.size() == 1 ? r[0] : r[i]));
  const SequenceLimit lim = classify_limit(drv);
  switch (lim.cls) {
    case LimitClass::Zero: return {RegimeKind::Sparse, 0.0};
    case LimitClass::Infinite: return {RegimeKind::Dense, kInf};
    case LimitClass::Finite: break;
  }
  return {RegimeKind::Critical, lim.value};
}

double variance_normalizer(const DensityModel& model, NormalizerFamily family, RegimeKind regime, int k, double n,
                           double t, double r) {
  const int d = model.dim();
  const double lg = std::log(n) + model.log_g(t);
  if (family == NormalizerFamily::Lite) {
    const double x = lg + std::log(model.q(t));
    switch (regime) {
      case RegimeKind::Sparse: return std::exp((k + 1) * x);
      case RegimeKind::Critical: return 1.0;
      case RegimeKind::Dense: return std::exp((2 * k + 1) * x);
    }
  }
  const double tail = family == NormalizerFamily::Heavy ? d * std::log(t) : std::log(model.q(t));
  const double lr = d * std::log(r);
  switch (regime) {
    case RegimeKind::Sparse: return std::exp((k + 1) * lg + k * lr + tail);
    case RegimeKind::Critical: return std::exp(lg + tail);
    case RegimeKind::Dense: return std::exp((2 * k + 1) * lg + 2 * k * lr + tail);
  }
  return 0.0;
}

double mean_normalizer(const DensityModel& model, NormalizerFamily family, int k, double n, double t, double r,
                       bool t_scaled) {
  const int d = model.dim();
  const double lg = std::log(n) + model.log_g(t);
  if (family == NormalizerFamily::Lite) return std::exp((k + 1) * (lg + std::log(model.q(t))));
  double tail = std::log(model.q(t));
  if (family == NormalizerFamily::Heavy) tail = (t_scaled ? d : 1) * std::log(t);
  return std::exp((k + 1) * lg + k * d * std::log(r) + tail);
}

// Potter bounds

PotterReport potter_check(const std::function<double(double)>& g, double alpha, double epsilon) {
  if (!(epsilon > 0.0)) fail(ErrorKind::InvalidInput, "Potter check needs epsilon > 0");
  PotterReport rep;
  rep.epsilon = epsilon;
  rep.alpha = alpha;
  const int nt = 121, nx = 81;
  std::vector<double> xs(nx);
  for (int j = 0; j < nx; ++j) xs[j] = std::pow(10.0, 4.0 * j / (nx - 1));
  std::vector<bool> ok(nt, true);
  double prev_g = kInf;
  for (int i = 0; i < nt; ++i) {
    const double t = std::pow(10.0, 6.0 * i / (nt - 1));
    rep.t_grid.push_back(t);
    const double gt = g(t);
    if (gt > prev_g * (1 + 1e-12)) ++rep.monotone_failures;
    prev_g = gt;
    for (double x : xs) {
      const double ratio = g(t * x) / gt;
      const double bound = (1 + epsilon) * std::pow(x, -alpha + epsilon);
      if (!(ratio < bound)) {
        ok[i] = false;
        ++rep.violations;
      }
    }
  }
  rep.passes_from.assign(nt, false);
  bool all = true;
  for (int i = nt - 1; i >= 0; --i) {
    all = all && ok[i];
    rep.passes_from[i] = all;
    if (all) rep.t0 = rep.t_grid[i];
  }
  // A valid bound must hold on a nontrivial tail of the grid.
  rep.pass = rep.t0.has_value() && *rep.t0 <= 1e5 && rep.monotone_failures == 0;
  return rep;
}

PotterReport potter_check(const DensityModel& model, double epsilon) {
  if (model.kind() != TailKind::Heavy) fail(ErrorKind::InvalidInput, "Potter bounds apply to heavy generators");
  return potter_check([&](double s) { return model.g(s); }, model.alpha(), epsilon);
}

}  // namespace hsu
