#pragma once

// Shared numerical plumbing: seeded streams, quadrature, interpolation,
// summary statistics and goodness-of-fit distances.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace hsu {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Stream seed for (seed, a, b); any replicate can be regenerated on its own.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept;

inline Rng make_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(derive_seed(seed, a, b));
}

// Uniform on the open interval (0, 1).
double uniform_open(Rng& rng);
double standard_normal(Rng& rng);

// Adaptive Gauss-Kronrod; either bound may be infinite.
double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-10,
                 double* error_estimate = nullptr);

// Fixed-order Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussRule gauss_legendre(int order);

// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson).
class Pchip {
 public:
  Pchip() = default;
  Pchip(std::vector<double> x, std::vector<double> y);
  double operator()(double x) const;
  double derivative(double x) const;
  // Index i such that x_i <= x < x_{i+1}, clamped to valid intervals.
  std::size_t interval(double x) const;
  const std::vector<double>& knots() const noexcept { return x_; }
  const std::vector<double>& values() const noexcept { return y_; }
  bool empty() const noexcept { return x_.empty(); }

 private:
  std::vector<double> x_, y_, m_;
};

double normal_cdf(double x) noexcept;
double log_sum_exp(double a, double b) noexcept;

// Pairwise summation in a fixed association order.
double pairwise_sum(std::span<const double> v) noexcept;

double mean(std::span<const double> v);
double variance(std::span<const double> v);  // unbiased
double covariance(std::span<const double> a, std::span<const double> b);  // unbiased
double correlation(std::span<const double> a, std::span<const double> b);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

// sup_x |F_emp(x) - Phi(x)| after standardizing by the empirical mean and SD,
// evaluated at the jump points of the empirical CDF.
double kolmogorov_to_normal(std::span<const double> samples);

// One-sample KS statistic against a continuous CDF.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
double ks_two_sample(std::vector<double> a, std::vector<double> b);
// Asymptotic Kolmogorov survival function P(K > lambda).
double kolmogorov_survival(double lambda) noexcept;

double chi_square_survival(double statistic, double dof);

// Runs body(i) for i in [0, count) on `threads` workers. Results must be
// written to index-addressed storage; scheduling never affects the output.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

std::uint64_t fnv1a64(std::span<const char> bytes) noexcept;

}  // namespace hsu
