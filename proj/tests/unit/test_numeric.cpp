#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hsu/errors.hpp"
#include "hsu/numeric.hpp"

using namespace hsu;

TEST_SUITE("numeric") {

TEST_CASE("adaptive quadrature on finite and infinite ranges") {
  CHECK(integrate([](double x) { return std::sin(x); }, 0.0, std::numbers::pi) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(integrate([](double x) { return std::exp(-x * x); }, -INFINITY, INFINITY) ==
        doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-10));
  CHECK(integrate([](double x) { return x * std::exp(-x); }, 0.0, INFINITY) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("gauss-legendre integrates polynomials exactly") {
  const GaussRule g = gauss_legendre(10);
  double s = 0.0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) s += g.weights[i] * std::pow(g.nodes[i], 18);
  CHECK(s == doctest::Approx(2.0 / 19.0).epsilon(1e-13));
}

TEST_CASE("pchip is monotone and interpolating") {
  Pchip p({0.0, 1.0, 2.0, 3.0}, {0.0, 0.1, 5.0, 5.1});
  CHECK(p(2.0) == doctest::Approx(5.0));
  double prev = -1.0;
  for (double x = 0.0; x <= 3.0; x += 0.01) {
    CHECK(p(x) >= prev - 1e-14);
    prev = p(x);
  }
}

TEST_CASE("streams are reproducible and distinct") {
  Rng a = make_rng(42, 1, 2), b = make_rng(42, 1, 2), c = make_rng(42, 1, 3);
  CHECK(a() == b());
  CHECK(make_rng(42, 1, 2)() != c());
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
}

TEST_CASE("summary statistics") {
  const std::vector<double> x = {1, 2, 3, 4}, y = {2, 4, 6, 8.5};
  CHECK(mean(x) == 2.5);
  CHECK(variance(x) == doctest::Approx(5.0 / 3.0));
  CHECK(correlation(x, y) > 0.99);
  const LineFit f = fit_line(std::vector<double>{0, 1, 2}, std::vector<double>{1, 3, 5});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
}

TEST_CASE("d_K of true normals stays inside the DKW envelope") {
  const std::size_t R = 2000;
  int inside = 0;
  for (int rep = 0; rep < 20; ++rep) {
    Rng rng = make_rng(7, rep);
    std::vector<double> v(R);
    for (double& x : v) x = standard_normal(rng);
    const double dk = kolmogorov_to_normal(v);
    CHECK(dk >= 0.0);
    CHECK(dk <= 1.0);
    inside += dk < 1.36 / std::sqrt(static_cast<double>(R));
  }
  CHECK(inside >= 18);
}

TEST_CASE("d_K detects a skewed law") {
  Rng rng = make_rng(3);
  std::vector<double> v(4000);
  for (double& x : v) x = -std::log(uniform_open(rng));
  CHECK(kolmogorov_to_normal(v) > 0.05);
}

TEST_CASE("ks statistic against a uniform cdf") {
  Rng rng = make_rng(11);
  std::vector<double> v(20000);
  for (double& x : v) x = uniform_open(rng);
  CHECK(ks_statistic(v, [](double u) { return std::clamp(u, 0.0, 1.0); }) < 0.012);
  CHECK(kolmogorov_survival(0.0) == doctest::Approx(1.0));
  CHECK(kolmogorov_survival(1.36) == doctest::Approx(0.049).epsilon(0.05));
}

TEST_CASE("chi-square survival") {
  CHECK(chi_square_survival(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-9));
}

TEST_CASE("parallel_for output does not depend on thread count") {
  std::vector<double> a(1000), b(1000);
  auto body = [](std::vector<double>& out) {
    return [&out](std::size_t i) {
      Rng rng = make_rng(5, i);
      out[i] = standard_normal(rng);
    };
  };
  parallel_for(a.size(), 1, body(a));
  parallel_for(b.size(), 4, body(b));
  CHECK(a == b);
  CHECK(pairwise_sum(a) == pairwise_sum(b));
}

}
