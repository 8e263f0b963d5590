#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hsu/errors.hpp"
#include "hsu/limits.hpp"

using namespace hsu;

namespace {

constexpr double kPi = std::numbers::pi;

KernelSpec spec(const char* kind, int k = 1) {
  KernelSpec s;
  s.kind = kind;
  s.k = k;
  return s;
}

McOptions mc(std::uint64_t seed = 1, std::size_t samples = 1u << 18) {
  McOptions o;
  o.seed = seed;
  o.samples = samples;
  return o;
}

Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

void check_close(const LimitConstant& c, double oracle, double sigmas = 4.0) {
  INFO(c.name << " value " << c.value << " se " << c.se << " oracle " << oracle);
  CHECK(std::abs(c.value - oracle) <= sigmas * c.se + 1e-12 * std::abs(oracle));
}

// int_{x_2 >= 1} |x|^{-e} dx
double ball_halfspace_power(double e) {
  return std::sqrt(kPi) * std::tgamma((e - 1) / 2) / std::tgamma(e / 2) / (e - 2);
}

// int_{-1}^{1} 2 sqrt(1 - s^2) e^{-c|s|} ds: the unit disk sliced along the normal
double tilted_disk(double c) {
  return integrate([c](double s) { return 2 * std::sqrt(1 - s * s) * std::exp(-c * std::abs(s)); }, -1, 1, 1e-12);
}

}  // namespace

TEST_SUITE("limits") {

TEST_CASE("constants") {
  CHECK(unit_ball_volume(2) == doctest::Approx(kPi));
  CHECK(unit_ball_volume(3) == doctest::Approx(4 * kPi / 3));
  CHECK(light_constant(1, 2) == doctest::Approx(std::sqrt(kPi)));
  CHECK(light_constant(2, 3) == doctest::Approx(2 * kPi / 3));
}

TEST_CASE("light expectation: edge kernel, xi infinite") {
  auto ball = make_body("ball", 2);
  auto edge = make_kernel(spec("edge"));
  const AffineFrame f = initial_transformation(*ball, direction_from_angle(0.4));
  // C_{1,2} z / 2 * pi * int e^{-2v} dv
  const double oracle = std::sqrt(kPi) * f.z * kPi / 4;
  check_close(expectation_limit_light(*edge, f, INFINITY, 1.0, mc()), oracle);
  check_close(expectation_limit_light(*edge, f, 2.0, 0.0, mc()), oracle);
}

TEST_CASE("light expectation with a finite tilt") {
  auto ball = make_body("ball", 2);
  auto edge = make_kernel(spec("edge"));
  const AffineFrame f = initial_transformation(*ball, direction_from_angle(2.2));
  for (double c : {0.5, 2.0}) {
    // v >= -c s with weight e^{-2v - c s} integrates to e^{-c|s|}/2
    const double oracle = std::sqrt(kPi) * f.z / 2 * tilted_disk(c) / 2;
    check_close(expectation_limit_light(*edge, f, 1.0, c, mc()), oracle);
  }
}

TEST_CASE("light expectation is rotation invariant on the ball") {
  auto ball = make_body("ball", 2);
  auto tri = make_kernel(spec("vr", 2));
  const LimitConstant a = expectation_limit_light(*tri, initial_transformation(*ball, direction_from_angle(0.3)), 1.0, 1.0, mc(1));
  const LimitConstant b = expectation_limit_light(*tri, initial_transformation(*ball, direction_from_angle(2.9)), 1.0, 1.0, mc(2));
  CHECK(std::abs(a.value - b.value) < 4 * std::hypot(a.se, b.se));
}

TEST_CASE("I_{k,l}: edge kernel closed forms at xi infinite") {
  auto ball = make_body("ball", 2);
  auto edge = make_kernel(spec("edge"));
  const AffineFrame f = initial_transformation(*ball, direction_from_angle(1.0));
  // l = 2: z pi int e^{-u^2} du int e^{-2v} dv
  check_close(integral_Ikl(*edge, f, 2, INFINITY, 1.0, mc()), f.z * std::sqrt(kPi) * kPi / 2);
  // l = 1: z pi^2 int e^{-3u^2/2} du int e^{-3v} dv
  check_close(integral_Ikl(*edge, f, 1, INFINITY, 1.0, mc()), f.z * std::sqrt(2 * kPi / 3) * kPi * kPi / 3);
  // finite tilt, l = 2
  check_close(integral_Ikl(*edge, f, 2, 1.0, 1.0, mc()), f.z * std::sqrt(kPi) * tilted_disk(1.0) / 2);
}

TEST_CASE("I_{k,l}: degenerate collapse as xi grows") {
  auto ball = make_body("ball", 2);
  auto edge = make_kernel(spec("edge"));
  const AffineFrame f = initial_transformation(*ball, direction_from_angle(1.0));
  const double closed = f.z * std::sqrt(2 * kPi / 3) * kPi * kPi / 3;
  double prev = INFINITY;
  for (double xi : {0.5, 5.0, 500.0}) {
    const double dev = std::abs(integral_Ikl(*edge, f, 1, xi, 1.0, mc()).value - closed);
    CHECK(dev < prev);
    prev = dev;
  }
  CHECK(prev / closed < 0.005);
}

TEST_CASE("I_{k,l}: zero and doubled kernels") {
  auto ball = make_body("ball", 2);
  const AffineFrame f = initial_transformation(*ball, v2(0, 1));
  CustomKernel zero(1, 1.0, 1.0, [](const double* const*, int, double) { return 0.0; });
  CHECK(integral_Ikl(zero, f, 1, 1.0, 1.0, mc()).value == 0.0);
  CHECK(integral_Istar_kl(zero, f, 1, 1.0, 1.0, mc()).value == 0.0);
  auto edge = make_kernel(spec("edge"));
  CustomKernel twice(1, 1.0, 2.0, [&](const double* const* p, int d, double r) { return 2 * edge->eval(p, d, r); });
  const double a = integral_Ikl(*edge, f, 1, 1.0, 1.0, mc(5)).value;
  const double b = integral_Ikl(twice, f, 1, 1.0, 1.0, mc(5)).value;
  CHECK(b == doctest::Approx(4 * a).epsilon(1e-12));
}

TEST_CASE("lite expectation: edge kernel and the beta = 0 collapse") {
  auto ball = make_body("ball", 2);
  auto edge = make_kernel(spec("edge"));
  const AffineFrame f = initial_transformation(*ball, direction_from_angle(0.7));
  // (z^2 / 2) 2 pi P(beta |u0 - u1| <= r), u0 - u1 ~ N(0, 2)
  const double beta = 1.0, r = 1.3;
  check_close(expectation_limit_lite(*edge, f, beta, r, mc()), f.z * f.z * kPi * std::erf(r / (2 * beta)));
  for (int k = 1; k <= 3; ++k) {
    auto vr = make_kernel(spec("vr", k));
    const double oracle = std::pow(f.z * std::sqrt(2 * kPi), k + 1) / std::tgamma(k + 2.0);
    CHECK(expectation_limit_lite(*vr, f, 0.0, 1.0, mc()).value == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("lite I*: closed forms") {
  auto ball = make_body("ball", 2);
  auto edge = make_kernel(spec("edge"));
  const AffineFrame f = initial_transformation(*ball, direction_from_angle(0.7));
  const double beta = 1.0, r = 1.0, c = r / beta;
  check_close(integral_Istar_kl(*edge, f, 2, beta, r, mc()), std::pow(f.z, 2) * 2 * kPi * std::erf(c / 2));
  const double shared = integrate([c](double u) {
    const double p = normal_cdf(u + c) - normal_cdf(u - c);
    return std::exp(-u * u / 2) / std::sqrt(2 * kPi) * p * p;
  }, -INFINITY, INFINITY, 1e-12);
  check_close(integral_Istar_kl(*edge, f, 1, beta, r, mc()), std::pow(f.z, 3) * std::pow(2 * kPi, 1.5) * shared);
  auto vr = make_kernel(spec("vr", 2));
  for (int l = 1; l <= 3; ++l) {
    const int m = 6 - l;
    CHECK(integral_Istar_kl(*vr, f, l, 0.0, 1.0, mc()).value ==
          doctest::Approx(std::pow(f.z * std::sqrt(2 * kPi), m)).epsilon(1e-12));
  }
}

TEST_CASE("kernel overlap integrals") {
  auto edge = make_kernel(spec("edge"));
  CHECK(kernel_overlap_integral(*edge, 2, 0, mc()).value == doctest::Approx(kPi).epsilon(1e-9));
  CHECK(kernel_overlap_integral(*edge, 2, 1, mc()).value == doctest::Approx(kPi * kPi).epsilon(1e-9));
  CHECK(kernel_overlap_integral(*edge, 2, 2, mc()).value == doctest::Approx(kPi).epsilon(1e-9));
  auto tri = make_kernel(spec("vr", 2));
  // int 1{|y1|,|y2|,|y1 - y2| <= 1} dy: lens areas over the unit disk
  const double lens = integrate([](double s) {
    return 2 * kPi * s * (2 * std::acos(s / 2) - s / 2 * std::sqrt(4 - s * s));
  }, 0, 1, 1e-12);
  check_close(kernel_overlap_integral(*tri, 2, 0, mc()), lens);
}

TEST_CASE("heavy H_{k,l}") {
  auto ball = make_body("ball", 2);
  auto edge = make_kernel(spec("edge"));
  const Vec up = v2(0, 1);
  const double alpha = 5;
  // l = 1: pi^2 int_H gamma^{-15}; l = 2: pi int_H gamma^{-10}
  CHECK(integral_Hkl(*edge, *ball, 1, alpha, up, up, mc()).value ==
        doctest::Approx(kPi * kPi * ball_halfspace_power(15)).epsilon(1e-6));
  CHECK(integral_Hkl(*edge, *ball, 2, alpha, up, up, mc()).value ==
        doctest::Approx(kPi * ball_halfspace_power(10)).epsilon(1e-6));
  CHECK(integral_Hkl(*edge, *ball, 1, alpha, up, -up, mc()).value == 0.0);
  const Vec side = direction_from_angle(kPi / 2 + 0.5);
  const double both = integral_Hkl(*edge, *ball, 1, alpha, up, side, mc()).value;
  const double swapped = integral_Hkl(*edge, *ball, 1, alpha, side, up, mc()).value;
  CHECK(both > 0);
  CHECK(both < integral_Hkl(*edge, *ball, 1, alpha, up, up, mc()).value);
  CHECK(both == doctest::Approx(swapped).epsilon(1e-12));
  CHECK_THROWS_AS(integral_Hkl(*edge, *ball, 1, 1.5, up, up, mc()), Error);
}

TEST_CASE("heavy expectation") {
  auto ball = make_body("ball", 2);
  auto edge = make_kernel(spec("edge"));
  const LimitConstant e = expectation_limit_heavy(*edge, *ball, 5, v2(0, 1), mc());
  CHECK(e.value == doctest::Approx(kPi * ball_halfspace_power(10) / 2).epsilon(1e-6));
  CHECK(e.inputs.at("t_normalization_exponent") == 1.0);
}

TEST_CASE("variance assembly") {
  std::map<int, LimitConstant> c;
  c[1].value = 3.0;
  c[2].value = 5.0;
  CHECK(variance_limit(NormalizerFamily::LightXi, RegimeKind::Dense, 1, c).value == 3.0);
  CHECK(variance_limit(NormalizerFamily::LightXi, RegimeKind::Sparse, 1, c).value == 2.5);
  CHECK(variance_limit(NormalizerFamily::LightXi, RegimeKind::Critical, 1, c, 1.0).value == doctest::Approx(3.0 + 2.5));
  // chi^{2k+1-l}: chi^2 I_1 + chi I_2 / 2
  CHECK(variance_limit(NormalizerFamily::Heavy, RegimeKind::Critical, 1, c, 2.0).value == doctest::Approx(12.0 + 5.0));
  // the lite family carries one more power of chi
  CHECK(variance_limit(NormalizerFamily::Lite, RegimeKind::Critical, 1, c, 2.0).value == doctest::Approx(24.0 + 10.0));
  std::map<int, LimitConstant> zero;
  zero[1].value = 0.0;
  zero[2].value = 0.0;
  CHECK(variance_limit(NormalizerFamily::LightXi, RegimeKind::Sparse, 1, zero).value == 0.0);
  std::map<int, LimitConstant> missing;
  missing[1].value = 1.0;
  CHECK_THROWS_AS(variance_limit(NormalizerFamily::LightXi, RegimeKind::Sparse, 1, missing), Error);
}

TEST_CASE("covariance function") {
  auto ball = make_body("egg2d");
  auto edge = make_kernel(spec("edge"));
  const Vec a = direction_from_angle(0.3), b = direction_from_angle(1.1);
  const auto opt = mc();
  const LimitConstant ab = covariance_function(*edge, *ball, 5, RegimeKind::Critical, 1.5, a, b, opt);
  const LimitConstant ba = covariance_function(*edge, *ball, 5, RegimeKind::Critical, 1.5, b, a, opt);
  CHECK(ab.value == doctest::Approx(ba.value).epsilon(1e-12));
  CHECK(covariance_function(*edge, *ball, 5, RegimeKind::Dense, 0, a, -a, opt).value == 0.0);
  std::map<int, LimitConstant> comps;
  for (int l = 1; l <= 2; ++l) comps[l] = integral_Hkl(*edge, *ball, l, 5, a, a, opt);
  CHECK(covariance_function(*edge, *ball, 5, RegimeKind::Critical, 1.5, a, a, opt).value ==
        doctest::Approx(variance_limit(NormalizerFamily::Heavy, RegimeKind::Critical, 1, comps, 1.5).value));
}

TEST_CASE("positivity at 5 standard errors for non-induced and simplex kernels") {
  auto ball = make_body("lp:4:diag=1.5,0.75", 2);
  const AffineFrame f = initial_transformation(*ball, direction_from_angle(0.9));
  for (const char* kind : {"edge", "vr"}) {
    auto h = make_kernel(spec(kind, kind == std::string("edge") ? 1 : 2));
    for (int l = 1; l <= h->order() + 1; ++l) {
      const LimitConstant i = integral_Ikl(*h, f, l, 1.0, 1.0, mc(3, 1u << 16));
      CHECK(i.value > 5 * i.se);
      const LimitConstant s = integral_Istar_kl(*h, f, l, 1.0, 1.0, mc(3, 1u << 16));
      CHECK(s.value > 5 * s.se);
      const LimitConstant hh = integral_Hkl(*h, *ball, l, 5, f.theta, f.theta, mc(3, 1u << 16));
      CHECK(hh.value > 5 * hh.se);
    }
  }
}

TEST_CASE("loss of dimension: lite integrals see only horizontal coordinates") {
  // At beta = 0 the lite integral is free of the kernel's vertical extent:
  // any kernel with c0 = 1 gives the same closed form.
  auto ball = make_body("ball", 2);
  const AffineFrame f = initial_transformation(*ball, v2(0, 1));
  auto vr = make_kernel(spec("vr", 1)), cech = make_kernel(spec("cech", 1));
  CHECK(integral_Istar_kl(*vr, f, 1, 0.0, 0.5, mc()).value == integral_Istar_kl(*cech, f, 1, 0.0, 0.5, mc()).value);
}

TEST_CASE("precision warnings") {
  auto ball = make_body("ball", 2);
  auto tri = make_kernel(spec("vr", 2));
  McOptions tiny = mc(1, 256);
  tiny.warn_rel_se = 1e-6;
  CHECK(integral_Ikl(*tri, initial_transformation(*ball, v2(0, 1)), 1, 1.0, 1.0, tiny).precision_warning);
}

TEST_CASE("mecke quadrature against an independent product rule") {
  // exponential generator on the ball: first moment of the edge count in tH
  auto ball = make_body("ball", 2);
  GeneratorSpec g;
  DensityModel m(ball, g);
  const double n = 100, t = 2, r = 0.5;
  const double q = mecke_edge_mean(m, v2(0, 1), n, t, r);
  // crude Monte Carlo oracle of (n^2 / 2) int int f f 1{|x - y| <= r} over tH x tH
  Rng rng = make_rng(77);
  const std::size_t N = 400000;
  std::vector<double> vals(N);
  const double C = m.normalizer_constant();
  for (std::size_t i = 0; i < N; ++i) {
    // x uniform on a box in tH, y uniform on the disk around x
    const double u = 30 * uniform_open(rng) - 15, v = t + 15 * uniform_open(rng);
    const double a = uniform_open(rng) * 2 * kPi, s = r * std::sqrt(uniform_open(rng));
    const double yu = u + s * std::cos(a), yv = v + s * std::sin(a);
    const double w = 450 * C * std::exp(-std::hypot(u, v)) * kPi * r * r * (yv >= t ? C * std::exp(-std::hypot(yu, yv)) : 0.0);
    vals[i] = w;
  }
  const double est = 0.5 * n * n * mean(vals);
  const double se = 0.5 * n * n * std::sqrt(variance(vals) / N);
  CHECK(std::abs(est - q) < 4 * se + 1e-3 * q);
}

TEST_CASE("conditional orders") {
  auto ball = make_body("ball", 2);
  GeneratorSpec g;
  DensityModel ex(ball, g);
  const std::vector<double> n = {1e3, 1e4, 1e5};
  std::vector<double> t;
  for (double v : n) t.push_back(std::log(v));
  const ConditionalOrders o = conditional_variance_order(ex, NormalizerFamily::LightXi, 1, n, t);
  for (std::size_t i = 0; i < n.size(); ++i) {
    CHECK(o.dk_order[i] == doctest::Approx(t[i] / std::sqrt(n[i])));
    CHECK(o.variance_order[i] == doctest::Approx(std::pow(n[i], 3) / t[i]));
  }
  GeneratorSpec hv;
  hv.kind = TailKind::Heavy;
  DensityModel h(ball, hv);
  const ConditionalOrders oh = conditional_variance_order(h, NormalizerFamily::Heavy, 1, n, t);
  CHECK(oh.dk_order[0] == doctest::Approx(std::pow(t[0], 4) / std::sqrt(n[0])));
  CHECK_THROWS_AS(conditional_variance_order(ex, NormalizerFamily::LightXi, 1, {10, 20}, {5, 9}), Error);
}

TEST_CASE("rate diagnostic") {
  auto ball = make_body("ball", 2);
  GeneratorSpec g;
  DensityModel ex(ball, g);
  auto edge = make_kernel(spec("edge"));
  const std::vector<double> n = {1e3, 1e4, 1e5};
  std::vector<double> t, var;
  for (double v : n) t.push_back(0.2 * std::log(v));
  for (double v : n) var.push_back(std::pow(v, 1.5));
  McOptions o = mc(1, 1u << 14);
  const RateDiagnostic d = clt_rate_diagnostic(ex, {v2(0, 1)}, {1.0}, *edge, n, t, {1, 1, 1}, var, o);
  for (std::size_t i = 0; i < n.size(); ++i) {
    CHECK(d.b_kappa[i] > 0);
    CHECK(d.h4_norm[i] > 0);
    CHECK(d.bound_rate[i] > 0);
  }
  CHECK(d.theory_fit.slope < 0);
  CHECK_THROWS_AS(clt_rate_diagnostic(ex, {v2(0, 1)}, {1.0}, *edge, n, t, {1, 1, 1}, {1, 0, 1}, o), Error);
}

}
