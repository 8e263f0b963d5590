#include "hsu/limits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hsu/errors.hpp"
#include "hsu/sampling.hpp"

namespace hsu {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct McResult {
  double value = 0.0, se = 0.0;
  std::size_t samples = 0;
};

// batch_sum(rng, count) returns the sum of count i.i.d. draws.
McResult run_batches(const McOptions& opt, std::uint64_t tag,
                     const std::function<double(Rng&, std::size_t)>& batch_sum) {
  const int batches = std::max(2, opt.batches);
  const std::size_t per = std::max<std::size_t>(1, opt.samples / static_cast<std::size_t>(batches));
  std::vector<double> means(static_cast<std::size_t>(batches));
  parallel_for(means.size(), opt.threads, [&](std::size_t b) {
    Rng rng = make_rng(opt.seed, tag, b);
    means[b] = batch_sum(rng, per) / static_cast<double>(per);
  });
  McResult out;
  out.value = mean(means);
  out.se = std::sqrt(variance(means) / static_cast<double>(batches));
  out.samples = per * static_cast<std::size_t>(batches);
  return out;
}

void uniform_in_ball(Rng& rng, int d, double radius, double* out) {
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (int j = 0; j < d; ++j) {
      out[j] = standard_normal(rng);
      norm2 += out[j] * out[j];
    }
  } while (norm2 == 0.0);
  const double rho = radius * std::pow(uniform_open(rng), 1.0 / d) / std::sqrt(norm2);
  for (int j = 0; j < d; ++j) out[j] *= rho;
}

double factorial(int k) { return std::tgamma(k + 1.0); }

void finish(LimitConstant& c, const McResult& r, double scale, const McOptions& opt) {
  c.value = scale * r.value;
  c.se = std::abs(scale) * r.se;
  c.samples = r.samples;
  c.precision_warning = c.value != 0.0 && c.relative_se() > opt.warn_rel_se;
}

void check_frame(const AffineFrame& frame) {
  if (frame.A.rows() < 2 || frame.A.rows() != frame.A.cols() || frame.normal.size() != frame.A.rows())
    fail(ErrorKind::InvalidInput, "limit constants need a frame from initial_transformation");
}

// Tilted exponential factor: int_{v >= 0, v >= -w_i} e^{-m v - sum w} dv.
double tilt_factor(const double* w, int count, int m) {
  double sum = 0.0, vmin = 0.0;
  for (int i = 0; i < count; ++i) {
    sum += w[i];
    vmin = std::max(vmin, -w[i]);
  }
  return std::exp(-sum - m * vmin) / m;
}

}  // namespace

double unit_ball_volume(int d) { return std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d + 1.0); }

double light_constant(int k, int d) { return std::pow(2.0 * kPi / (k + 1), 0.5 * (d - 1)); }

LimitConstant expectation_limit_light(const Kernel& h, const AffineFrame& frame, double xi, double r,
                                      const McOptions& opt) {
  check_frame(frame);
  if (!(xi > 0.0)) fail(ErrorKind::InvalidInput, "the light expectation limit needs xi > 0");
  if (!(r >= 0.0) || !std::isfinite(r)) fail(ErrorKind::InvalidInput, "limit radius must be finite and >= 0");
  const int k = h.order();
  const int d = static_cast<int>(frame.A.rows());
  const double kappa = h.kappa();
  const double c = (std::isinf(xi) || r == 0.0) ? 0.0 : r / xi;
  const Vec normal = frame.normal;
  LimitConstant out;
  out.kind = "expectation";
  out.name = "E_light";
  out.regime = "none";
  out.inputs = {{"k", k}, {"d", d}, {"xi", xi}, {"r", r}, {"z", frame.z}};
  const McResult res = run_batches(opt, 0x65787031ULL, [&](Rng& rng, std::size_t count) {
    std::vector<double> buf(static_cast<std::size_t>((k + 1) * d), 0.0), w(static_cast<std::size_t>(k));
    std::vector<const double*> pts(static_cast<std::size_t>(k + 1));
    for (int i = 0; i <= k; ++i) pts[i] = buf.data() + i * d;
    double acc = 0.0;
    for (std::size_t s = 0; s < count; ++s) {
      for (int i = 1; i <= k; ++i) {
        double* y = buf.data() + i * d;
        uniform_in_ball(rng, d, kappa, y);
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += normal[j] * y[j];
        w[i - 1] = c * dot;
      }
      const double v = h.eval(pts.data(), d, 1.0);
      if (v != 0.0) acc += v * tilt_factor(w.data(), k, k + 1);
    }
    return acc;
  });
  const double scale =
      light_constant(k, d) * frame.z / factorial(k + 1) * std::pow(unit_ball_volume(d) * std::pow(kappa, d), k);
  finish(out, res, scale, opt);
  return out;
}

LimitConstant integral_Ikl(const Kernel& h, const AffineFrame& frame, int l, double xi, double r,
                           const McOptions& opt) {
  check_frame(frame);
  const int k = h.order();
  if (l < 1 || l > k + 1) fail(ErrorKind::InvalidInput, "I_{k,l} needs 1 <= l <= k+1");
  if (!(xi > 0.0)) fail(ErrorKind::InvalidInput, "I_{k,l} needs xi > 0");
  if (!(r >= 0.0) || !std::isfinite(r)) fail(ErrorKind::InvalidInput, "limit radius must be finite and >= 0");
  const int d = static_cast<int>(frame.A.rows());
  const int m = 2 * k + 2 - l;
  const int ny = 2 * k + 1 - l;
  const double kappa = h.kappa();
  const double c = (std::isinf(xi) || r == 0.0) ? 0.0 : r / xi;
  const Vec normal = frame.normal;
  LimitConstant out;
  out.kind = "component";
  out.name = "I";
  out.regime = "none";
  out.inputs = {{"k", k}, {"l", l}, {"d", d}, {"xi", xi}, {"r", r}, {"z", frame.z}};
  const McResult res = run_batches(opt, 0x496b6c00ULL + static_cast<std::uint64_t>(l), [&](Rng& rng, std::size_t count) {
    std::vector<double> buf(static_cast<std::size_t>((ny + 1) * d), 0.0), w(static_cast<std::size_t>(ny));
    auto at = [&](int i) { return static_cast<const double*>(buf.data() + i * d); };
    std::vector<const double*> first(static_cast<std::size_t>(k + 1)), second(static_cast<std::size_t>(k + 1));
    for (int i = 0; i <= k; ++i) first[i] = at(i);
    for (int i = 0; i < l; ++i) second[i] = at(i);
    for (int i = l; i <= k; ++i) second[i] = at(i + k + 1 - l);
    double acc = 0.0;
    for (std::size_t s = 0; s < count; ++s) {
      for (int i = 1; i <= ny; ++i) {
        double* y = buf.data() + i * d;
        uniform_in_ball(rng, d, kappa, y);
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += normal[j] * y[j];
        w[i - 1] = c * dot;
      }
      const double h1 = h.eval(first.data(), d, 1.0);
      if (h1 == 0.0) continue;
      const double h2 = h.eval(second.data(), d, 1.0);
      if (h2 == 0.0) continue;
      acc += h1 * h2 * tilt_factor(w.data(), ny, m);
    }
    return acc;
  });
  const double scale = frame.z * std::pow(2.0 * kPi / m, 0.5 * (d - 1)) *
                       std::pow(unit_ball_volume(d) * std::pow(kappa, d), ny);
  finish(out, res, scale, opt);
  return out;
}

namespace {

// Mapped horizontal points A (beta u_i, 0) with u_i standard Gaussian.
void draw_horizontal(Rng& rng, const Mat& a, double beta, int d, double* out) {
  double u[16];
  for (int j = 0; j + 1 < d; ++j) u[j] = beta * standard_normal(rng);
  for (int row = 0; row < d; ++row) {
    double s = 0.0;
    for (int j = 0; j + 1 < d; ++j) s += a(row, j) * u[j];
    out[row] = s;
  }
}

double origin_value(const Kernel& h, int d, double r) {
  const std::vector<double> zero(static_cast<std::size_t>(d), 0.0);
  std::vector<const double*> pts(static_cast<std::size_t>(h.order() + 1), zero.data());
  return h.eval(pts.data(), d, r);
}

}  // namespace

LimitConstant expectation_limit_lite(const Kernel& h, const AffineFrame& frame, double beta, double r,
                                     const McOptions& opt) {
  check_frame(frame);
  if (!(beta >= 0.0) || !std::isfinite(beta)) fail(ErrorKind::InvalidInput, "lite limits need finite beta >= 0");
  if (!(r > 0.0) || !std::isfinite(r)) fail(ErrorKind::InvalidInput, "lite limits need r in (0, inf)");
  const int k = h.order();
  const int d = static_cast<int>(frame.A.rows());
  if (d > 16) fail(ErrorKind::InvalidInput, "dimension too large");
  LimitConstant out;
  out.kind = "expectation";
  out.name = "E_lite";
  out.regime = "none";
  out.inputs = {{"k", k}, {"d", d}, {"beta", beta}, {"r", r}, {"z", frame.z}};
  const double scale = std::pow(frame.z * std::pow(2.0 * kPi, 0.5 * (d - 1)), k + 1) / factorial(k + 1);
  if (beta == 0.0) {
    out.value = scale * origin_value(h, d, r);
    return out;
  }
  const McResult res = run_batches(opt, 0x6c697465ULL, [&](Rng& rng, std::size_t count) {
    std::vector<double> buf(static_cast<std::size_t>((k + 1) * d));
    std::vector<const double*> pts(static_cast<std::size_t>(k + 1));
    for (int i = 0; i <= k; ++i) pts[i] = buf.data() + i * d;
    double acc = 0.0;
    for (std::size_t s = 0; s < count; ++s) {
      for (int i = 0; i <= k; ++i) draw_horizontal(rng, frame.A, beta, d, buf.data() + i * d);
      acc += h.eval(pts.data(), d, r);
    }
    return acc;
  });
  finish(out, res, scale, opt);
  return out;
}

LimitConstant integral_Istar_kl(const Kernel& h, const AffineFrame& frame, int l, double beta, double r,
                                const McOptions& opt) {
  check_frame(frame);
  const int k = h.order();
  if (l < 1 || l > k + 1) fail(ErrorKind::InvalidInput, "I*_{k,l} needs 1 <= l <= k+1");
  if (!(beta >= 0.0) || !std::isfinite(beta)) fail(ErrorKind::InvalidInput, "lite limits need finite beta >= 0");
  if (!(r > 0.0) || !std::isfinite(r)) fail(ErrorKind::InvalidInput, "lite limits need r in (0, inf)");
  const int d = static_cast<int>(frame.A.rows());
  if (d > 16) fail(ErrorKind::InvalidInput, "dimension too large");
  const int m = 2 * k + 2 - l;
  LimitConstant out;
  out.kind = "component";
  out.name = "Istar";
  out.regime = "none";
  // Only m points of R^{d-1} are integrated.
  out.inputs = {{"k", k}, {"l", l}, {"d", d}, {"beta", beta}, {"r", r}, {"z", frame.z},
                {"integration_dim", static_cast<double>(m * (d - 1))}};
  const double scale = std::pow(frame.z * std::pow(2.0 * kPi, 0.5 * (d - 1)), m);
  if (beta == 0.0) {
    const double c0 = origin_value(h, d, r);
    out.value = scale * c0 * c0;
    return out;
  }
  const McResult res = run_batches(opt, 0x49737400ULL + static_cast<std::uint64_t>(l), [&](Rng& rng, std::size_t count) {
    std::vector<double> buf(static_cast<std::size_t>(m * d));
    auto at = [&](int i) { return static_cast<const double*>(buf.data() + i * d); };
    std::vector<const double*> first(static_cast<std::size_t>(k + 1)), second(static_cast<std::size_t>(k + 1));
    for (int i = 0; i <= k; ++i) first[i] = at(i);
    for (int i = 0; i < l; ++i) second[i] = at(i);
    for (int i = l; i <= k; ++i) second[i] = at(i + k + 1 - l);
    double acc = 0.0;
    for (std::size_t s = 0; s < count; ++s) {
      for (int i = 0; i < m; ++i) draw_horizontal(rng, frame.A, beta, d, buf.data() + i * d);
      const double h1 = h.eval(first.data(), d, r);
      if (h1 == 0.0) continue;
      acc += h1 * h.eval(second.data(), d, r);
    }
    return acc;
  });
  finish(out, res, scale, opt);
  return out;
}

LimitConstant kernel_overlap_integral(const Kernel& h, int d, int l, const McOptions& opt) {
  const int k = h.order();
  if (l < 0 || l > k + 1) fail(ErrorKind::InvalidInput, "overlap index must be in 0..k+1");
  if (d < 1 || d > 16) fail(ErrorKind::InvalidInput, "dimension out of range");
  const int ny = l == 0 ? k : 2 * k + 1 - l;
  const double kappa = h.kappa();
  LimitConstant out;
  out.kind = "component";
  out.name = "K";
  out.regime = "none";
  out.inputs = {{"k", k}, {"l", l}, {"d", d}};
  const McResult res = run_batches(opt, 0x4b000000ULL + static_cast<std::uint64_t>(l), [&](Rng& rng, std::size_t count) {
    std::vector<double> buf(static_cast<std::size_t>((ny + 1) * d), 0.0);
    auto at = [&](int i) { return static_cast<const double*>(buf.data() + i * d); };
    std::vector<const double*> first(static_cast<std::size_t>(k + 1)), second(static_cast<std::size_t>(k + 1));
    for (int i = 0; i <= k; ++i) first[i] = at(i);
    if (l > 0) {
      for (int i = 0; i < l; ++i) second[i] = at(i);
      for (int i = l; i <= k; ++i) second[i] = at(i + k + 1 - l);
    }
    double acc = 0.0;
    for (std::size_t s = 0; s < count; ++s) {
      for (int i = 1; i <= ny; ++i) uniform_in_ball(rng, d, kappa, buf.data() + i * d);
      const double h1 = h.eval(first.data(), d, 1.0);
      if (h1 == 0.0) continue;
      acc += l == 0 ? h1 : h1 * h.eval(second.data(), d, 1.0);
    }
    return acc;
  });
  finish(out, res, std::pow(unit_ball_volume(d) * std::pow(kappa, d), ny), opt);
  return out;
}

LimitConstant integral_Hkl(const Kernel& h, const RotundBody& body, int l, double alpha, const Vec& theta1,
                           const Vec& theta2, const McOptions& opt) {
  const int k = h.order();
  const int d = body.dim();
  if (l < 1 || l > k + 1) fail(ErrorKind::InvalidInput, "H_{k,l} needs 1 <= l <= k+1");
  if (!(alpha > d)) fail(ErrorKind::InvalidInput, "heavy limits need alpha > d");
  Vec t1 = normalize_direction(theta1), t2 = normalize_direction(theta2);
  // Canonical order so that the assembled covariance is exactly symmetric.
  if (std::lexicographical_compare(t2.data(), t2.data() + d, t1.data(), t1.data() + d)) std::swap(t1, t2);
  const int m = 2 * k + 2 - l;
  LimitConstant out;
  out.kind = "component";
  out.name = "H";
  out.regime = "none";
  out.inputs = {{"k", k}, {"l", l}, {"d", d}, {"alpha", alpha}, {"angle_gap", std::acos(std::clamp(t1.dot(t2), -1.0, 1.0))}};
  if ((t1 + t2).norm() < 1e-12) return out;
  double j_se = 0.0;
  const double j = gauge_power_integral(body, t1, t2, alpha * m, opt.seed, 1u << 18, &j_se);
  const LimitConstant kint = kernel_overlap_integral(h, d, l, opt);
  out.value = kint.value * j;
  out.se = std::hypot(kint.se * j, kint.value * j_se);
  out.samples = kint.samples;
  out.inputs["J"] = j;
  out.inputs["K"] = kint.value;
  out.precision_warning = out.value != 0.0 && out.relative_se() > opt.warn_rel_se;
  return out;
}

LimitConstant expectation_limit_heavy(const Kernel& h, const RotundBody& body, double alpha, const Vec& theta,
                                      const McOptions& opt) {
  const int k = h.order();
  const int d = body.dim();
  if (!(alpha > d)) fail(ErrorKind::InvalidInput, "heavy limits need alpha > d");
  const Vec t = normalize_direction(theta);
  double j_se = 0.0;
  const double j = gauge_power_integral(body, t, t, alpha * (k + 1), opt.seed, 1u << 18, &j_se);
  const LimitConstant kint = kernel_overlap_integral(h, d, 0, opt);
  LimitConstant out;
  out.kind = "expectation";
  out.name = "E_heavy";
  out.regime = "none";
  out.value = kint.value * j / factorial(k + 1);
  out.se = std::hypot(kint.se * j, kint.value * j_se) / factorial(k + 1);
  out.samples = kint.samples;
  out.inputs = {{"k", k}, {"d", d}, {"alpha", alpha}, {"J", j}, {"K", kint.value},
                // E / ([ng]^{k+1} r^{dk} t) grows like t^{d-1} times the value above.
                {"t_normalization_exponent", static_cast<double>(d - 1)}};
  out.precision_warning = out.value != 0.0 && out.relative_se() > opt.warn_rel_se;
  return out;
}

LimitConstant variance_limit(NormalizerFamily family, RegimeKind regime, int k,
                             const std::map<int, LimitConstant>& components, double chi) {
  if (k < 1) fail(ErrorKind::InvalidInput, "kernel order must be >= 1");
  auto get = [&](int l) -> const LimitConstant& {
    const auto it = components.find(l);
    if (it == components.end())
      fail(ErrorKind::Dependency, "variance limit needs the component with l = " + std::to_string(l));
    return it->second;
  };
  LimitConstant out;
  out.kind = "variance";
  out.name = family == NormalizerFamily::Heavy ? "H_sum" : (family == NormalizerFamily::Lite ? "Istar_sum" : "I_sum");
  out.regime = regime_name(regime);
  out.inputs = {{"k", k}};
  bool warn = false;
  double var_se = 0.0;
  switch (regime) {
    case RegimeKind::Sparse: {
      const LimitConstant& c = get(k + 1);
      out.value = c.value / factorial(k + 1);
      var_se = std::pow(c.se / factorial(k + 1), 2);
      warn = c.precision_warning;
      break;
    }
    case RegimeKind::Dense: {
      const LimitConstant& c = get(1);
      out.value = c.value / std::pow(factorial(k), 2);
      var_se = std::pow(c.se / std::pow(factorial(k), 2), 2);
      warn = c.precision_warning;
      break;
    }
    case RegimeKind::Critical: {
      if (!(chi > 0.0) || !std::isfinite(chi)) fail(ErrorKind::InvalidInput, "critical regime needs chi in (0, inf)");
      out.inputs["chi"] = chi;
      const int shift = family == NormalizerFamily::Lite ? 2 : 1;
      for (int l = 1; l <= k + 1; ++l) {
        const LimitConstant& c = get(l);
        const double coef =
            std::pow(chi, 2 * k + shift - l) / (factorial(l) * std::pow(factorial(k + 1 - l), 2));
        out.value += coef * c.value;
        var_se += std::pow(coef * c.se, 2);
        warn = warn || c.precision_warning;
      }
      break;
    }
  }
  out.se = std::sqrt(var_se);
  out.precision_warning = warn;
  return out;
}

LimitConstant covariance_function(const Kernel& h, const RotundBody& body, double alpha, RegimeKind regime,
                                  double chi, const Vec& theta1, const Vec& theta2, const McOptions& opt) {
  const int k = h.order();
  std::map<int, LimitConstant> comps;
  for (int l = 1; l <= k + 1; ++l) {
    if (regime == RegimeKind::Sparse && l != k + 1) continue;
    if (regime == RegimeKind::Dense && l != 1) continue;
    comps[l] = integral_Hkl(h, body, l, alpha, theta1, theta2, opt);
  }
  LimitConstant out = variance_limit(NormalizerFamily::Heavy, regime, k, comps, chi);
  out.kind = "covariance";
  out.name = "C";
  out.inputs["alpha"] = alpha;
  out.inputs["angle_gap"] = comps.begin()->second.inputs["angle_gap"];
  return out;
}

// Mecke quadrature

double mecke_edge_mean(const DensityModel& model, const Vec& theta_in, double n, double t, double r) {
  const RotundBody& body = model.body();
  if (body.dim() != 2) fail(ErrorKind::InvalidInput, "the edge-count quadrature is planar only");
  if (!(r > 0.0) || !(n > 0.0) || !(t >= 1.0)) fail(ErrorKind::InvalidInput, "quadrature needs n > 0, t >= 1, r > 0");
  const Vec theta = normalize_direction(theta_in);
  const SupportResult sup = support(body, theta);
  const double level = t * sup.zeta;
  const double e[2] = {theta[0], theta[1]};
  const double ep[2] = {-theta[1], theta[0]};
  auto logf = [&](double u, double v) {
    const double x[2] = {u * ep[0] + v * e[0], u * ep[1] + v * e[1]};
    return model.log_density_raw(x);
  };
  const double u_p = t * (sup.point[0] * ep[0] + sup.point[1] * ep[1]);
  const double ref = logf(u_p, level);
  const double drop = 46.0;
  auto extent = [&](auto&& lf) {
    double step = 0.25 * r;
    while (lf(step) > ref - drop) {
      step *= 2.0;
      if (step > 1e12) fail(ErrorKind::Numeric, "quadrature window does not close");
    }
    return step;
  };
  const double v_span = extent([&](double s) { return logf(u_p, level + s); });
  const double u_left = extent([&](double s) { return logf(u_p - s, level); });
  const double u_right = extent([&](double s) { return logf(u_p + s, level); });

  static const GaussRule rule = gauss_legendre(20);
  // Mass of f over B((u, v), r) cap {v' >= level}.
  auto ball_mass = [&](double u, double v) {
    const double delta = v - level;
    std::vector<double> cuts = {-kPi / 2, kPi / 2};
    if (delta < r) {
      const double phi = std::acos(std::max(0.0, delta / r));
      cuts = {-kPi / 2, -phi, phi, kPi / 2};
    }
    double total = 0.0;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double a = cuts[c], b = cuts[c + 1];
      if (!(b > a)) continue;
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double phi = 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes[i];
        const double half = r * std::cos(phi);
        const double lo = std::max(-half, -delta), hi = half;
        if (!(hi > lo)) continue;
        const double du = r * std::sin(phi);
        double inner = 0.0;
        for (std::size_t j = 0; j < rule.nodes.size(); ++j) {
          const double s = 0.5 * (lo + hi) + 0.5 * (hi - lo) * rule.nodes[j];
          inner += rule.weights[j] * std::exp(logf(u + du, v + s));
        }
        total += 0.5 * (b - a) * rule.weights[i] * r * std::cos(phi) * 0.5 * (hi - lo) * inner;
      }
    }
    return total;
  };
  auto row = [&](double v) {
    auto g = [&](double u) { return std::exp(logf(u, v)) * ball_mass(u, v); };
    return integrate(g, u_p - u_left, u_p, 1e-7) + integrate(g, u_p, u_p + u_right, 1e-7);
  };
  double total = 0.0;
  const double top = level + v_span;
  if (r < v_span) {
    total = integrate(row, level, level + r, 1e-7) + integrate(row, level + r, top, 1e-7);
  } else {
    total = integrate(row, level, top, 1e-7);
  }
  return 0.5 * n * n * total;
}

// Rate diagnostics

RateDiagnostic clt_rate_diagnostic(const DensityModel& model, const std::vector<Vec>& thetas_in,
                                   const std::vector<double>& weights, const Kernel& h, const std::vector<double>& n,
                                   const std::vector<double>& t, const std::vector<double>& r,
                                   const std::vector<double>& variance_in, const McOptions& opt) {
  const std::size_t g = n.size();
  if (g < 2 || t.size() != g || r.size() != g || variance_in.size() != g)
    fail(ErrorKind::InvalidInput, "rate diagnostic needs aligned n, t, r and variance grids of length >= 2");
  if (thetas_in.empty() || weights.size() != thetas_in.size())
    fail(ErrorKind::InvalidInput, "one weight per angle is required");
  const RotundBody& body = model.body();
  const int d = body.dim();
  const int k = h.order();
  std::vector<Vec> thetas;
  for (const Vec& th : thetas_in) thetas.push_back(normalize_direction(th));
  std::vector<SupportResult> sups;
  for (const Vec& th : thetas) sups.push_back(support(body, th));

  RateDiagnostic out;
  out.n = n;
  out.t = t;
  out.r = r;
  out.variance = variance_in;
  NormalizerFamily family = NormalizerFamily::Heavy;
  if (model.kind() == TailKind::Light) {
    const SequenceLimit xi = classify_limit(std::vector<double>{model.a(t[g - 2]), model.a(t[g - 1])});
    family = (model.spec().psi == "t^2/2" || xi.cls == LimitClass::Zero) ? NormalizerFamily::Lite
                                                                           : NormalizerFamily::LightXi;
  }

  // Fixed probe points in the unit ball for ball masses.
  std::vector<double> probes;
  {
    Rng rng = make_rng(opt.seed, 0x62616c6cULL);
    probes.resize(static_cast<std::size_t>(2048 * d));
    for (std::size_t i = 0; i < 2048; ++i) uniform_in_ball(rng, d, 1.0, probes.data() + i * d);
  }
  const double vol_unit = unit_ball_volume(d);

  for (std::size_t i = 0; i < g; ++i) {
    if (!(variance_in[i] > 0.0)) fail(ErrorKind::Degenerate, "rate diagnostic needs a positive variance");
    std::vector<Halfspace> hs;
    for (const Vec& th : thetas) hs.push_back(outer_halfspace(body, th, t[i]));
    auto in_union = [&](const double* x) {
      for (const Halfspace& hh : hs)
        if (hh.contains(x)) return true;
      return false;
    };
    const double R = 4.0 * h.kappa() * r[i];
    auto ball_measure = [&](const Vec& y) {
      std::vector<double> x(d);
      double acc = 0.0;
      for (std::size_t p = 0; p < 2048; ++p) {
        for (int j = 0; j < d; ++j) x[j] = y[j] + R * probes[p * d + j];
        if (in_union(x.data())) acc += std::exp(model.log_density_raw(x.data()));
      }
      return acc / 2048.0 * vol_unit * std::pow(R, d);
    };
    double best = ball_measure(Vec::Zero(d));
    for (std::size_t a = 0; a < thetas.size(); ++a) {
      const Vec base = t[i] * sups[a].point;
      for (double depth : {-0.5, 0.0, 0.5, 1.0}) best = std::max(best, ball_measure(base + depth * R * thetas[a]));
    }
    out.b_kappa.push_back(n[i] * best);

    // ||h_n^2||_f^2 = int h_n^4 prod f; x_0 from the mixture of f restricted to each halfspace.
    std::vector<double> masses;
    double mass_sum = 0.0;
    for (const Vec& th : thetas) {
      const AffineFrame frame = initial_transformation(body, th);
      masses.push_back(halfspace_mass(model, frame, t[i]).numeric);
      mass_sum += masses.back();
    }
    const RadialTable table(model, t[i], 1u << 12);
    const std::size_t samples = std::min<std::size_t>(opt.samples, 1u << 15);
    Rng rng = make_rng(opt.seed, 0x68346e6fULL, i);
    std::vector<double> buf(static_cast<std::size_t>((k + 1) * d)), w(d);
    std::vector<const double*> pts(static_cast<std::size_t>(k + 1));
    for (int j = 0; j <= k; ++j) pts[j] = buf.data() + j * d;
    double acc = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
      double pick = uniform_open(rng) * mass_sum;
      std::size_t a = 0;
      while (a + 1 < masses.size() && pick > masses[a]) pick -= masses[a++];
      for (std::size_t tries = 0;; ++tries) {
        if (tries > 10000000) fail(ErrorKind::Efficiency, "halfspace rejection stalled in the rate diagnostic");
        const double rad = table.draw(rng);
        sample_cone_point(body, rng, w.data());
        for (int j = 0; j < d; ++j) buf[j] = rad * w[j];
        if (hs[a].contains(buf.data())) break;
      }
      int cover = 0;
      for (const Halfspace& hh : hs) cover += hh.contains(buf.data());
      double prod = 1.0;
      for (int j = 1; j <= k; ++j) {
        uniform_in_ball(rng, d, h.kappa() * r[i], buf.data() + j * d);
        for (int c = 0; c < d; ++c) buf[j * d + c] += buf[c];
        prod *= std::exp(model.log_density_raw(buf.data() + j * d));
      }
      double hn = 0.0;
      for (std::size_t b = 0; b < hs.size(); ++b) {
        bool all = true;
        for (int j = 0; j <= k && all; ++j) all = hs[b].contains(buf.data() + j * d);
        if (all) hn += weights[b];
      }
      hn *= h.eval(pts.data(), d, r[i]);
      acc += std::pow(hn, 4) * prod * mass_sum / cover;
    }
    const double ball = vol_unit * std::pow(h.kappa() * r[i], d);
    const double h4 = acc / static_cast<double>(samples) * std::pow(ball, k);
    out.h4_norm.push_back(std::sqrt(h4));
    out.bound_rate.push_back(std::pow(n[i], 0.5 * (k + 1)) * std::max(1.0, std::pow(out.b_kappa.back(), 1.5 * k)) *
                             out.h4_norm.back() / variance_in[i]);
    const double gt = model.g(t[i]);
    double theory = 0.0;
    switch (family) {
      case NormalizerFamily::LightXi: theory = n[i] * model.q(t[i]) * std::pow(gt, 3 * k + 1); break;
      case NormalizerFamily::Lite: theory = n[i] * std::pow(model.q(t[i]) * gt, 3 * k + 1); break;
      case NormalizerFamily::Heavy: theory = n[i] * std::pow(t[i], d) * std::pow(gt, 3 * k + 1); break;
    }
    out.theory_rate.push_back(1.0 / std::sqrt(theory));
  }
  std::vector<double> ln, lb, lt;
  for (std::size_t i = 0; i < g; ++i) {
    ln.push_back(std::log(n[i]));
    lb.push_back(std::log(std::max(out.bound_rate[i], 1e-300)));
    lt.push_back(std::log(out.theory_rate[i]));
  }
  out.bound_fit = fit_line(ln, lb);
  out.theory_fit = fit_line(ln, lt);
  return out;
}

ConditionalOrders conditional_variance_order(const DensityModel& model, NormalizerFamily family, int k,
                                             const std::vector<double>& n, const std::vector<double>& t) {
  if (n.size() != t.size() || n.size() < 2) fail(ErrorKind::Config, "conditional orders need aligned n and t grids");
  const int d = model.dim();
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!(n[i] > 0.0) || !(t[i] >= 1.0)) fail(ErrorKind::Config, "conditional grids need n > 0 and t >= 1");
    if (i > 0 && !(n[i] > n[i - 1])) fail(ErrorKind::Config, "n grid must be increasing");
  }
  // t_n = o(n^{1/d}): the ratio must fall along the grid and end below one.
  for (std::size_t i = 1; i < n.size(); ++i)
    if (!(t[i] / std::pow(n[i], 1.0 / d) < t[i - 1] / std::pow(n[i - 1], 1.0 / d)))
      fail(ErrorKind::Config, "grid violates t_n = o(n^{1/d})");
  if (!(t.back() < std::pow(n.back(), 1.0 / d))) fail(ErrorKind::Config, "grid violates t_n = o(n^{1/d})");
  ConditionalOrders out;
  out.family = family;
  out.n = n;
  out.t = t;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double base_var = std::pow(n[i], 2 * k + 1), base_mean = std::pow(n[i], k + 1);
    const double rt = 1.0 / std::sqrt(n[i]);
    switch (family) {
      case NormalizerFamily::Lite:
        out.variance_order.push_back(base_var);
        out.dk_order.push_back(rt);
        out.mean_order.push_back(base_mean);
        break;
      case NormalizerFamily::LightXi: {
        const double q = model.q(t[i]);
        out.variance_order.push_back(base_var / std::pow(q, 2 * k));
        out.dk_order.push_back(std::pow(q, 2 * k) * rt);
        out.mean_order.push_back(base_mean / std::pow(q, k));
        break;
      }
      case NormalizerFamily::Heavy:
        out.variance_order.push_back(base_var / std::pow(t[i], 2 * d * k));
        out.dk_order.push_back(std::pow(t[i], 2 * d * k) * rt);
        out.mean_order.push_back(base_mean / std::pow(t[i], d * k));
        break;
    }
  }
  return out;
}

}  // namespace hsu
