#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hsu/density.hpp"
#include "hsu/ustat.hpp"

namespace hsu {

struct LimitConstant {
  std::string kind;    // expectation | variance | covariance | component
  std::string name;    // I, Istar, H, K, J, ...
  std::string regime;  // sparse | critical | dense | none
  double value = 0.0;
  double se = 0.0;
  std::map<std::string, double> inputs;
  std::size_t samples = 0;  // 0 for closed forms and quadrature
  bool precision_warning = false;
  double relative_se() const { return value != 0.0 ? se / std::abs(value) : 0.0; }
};

struct McOptions {
  std::uint64_t seed = 1;
  std::size_t samples = 1u << 20;
  int batches = 64;
  int threads = 1;
  double warn_rel_se = 0.05;
};

double unit_ball_volume(int d);
// C_{k,d} = [2 pi / (k+1)]^{(d-1)/2}
double light_constant(int k, int d);

// Light tails with xi > 0. xi may be +inf; r = 0 or xi = inf drop the tilt.
LimitConstant expectation_limit_light(const Kernel& h, const AffineFrame& frame, double xi, double r,
                                      const McOptions& opt = {});
LimitConstant integral_Ikl(const Kernel& h, const AffineFrame& frame, int l, double xi, double r,
                           const McOptions& opt = {});

// Light tails with xi = 0 and finite beta; the kernel is evaluated at radius r.
LimitConstant expectation_limit_lite(const Kernel& h, const AffineFrame& frame, double beta, double r,
                                     const McOptions& opt = {});
LimitConstant integral_Istar_kl(const Kernel& h, const AffineFrame& frame, int l, double beta, double r,
                                const McOptions& opt = {});

// int h_1(y_0, y_1) h_1(y_0, y_2) dy over (R^d)^{2k+1-l}; l = 0 gives int h_1(0, y) dy.
LimitConstant kernel_overlap_integral(const Kernel& h, int d, int l, const McOptions& opt = {});

// Heavy tails.
LimitConstant integral_Hkl(const Kernel& h, const RotundBody& body, int l, double alpha, const Vec& theta1,
                           const Vec& theta2, const McOptions& opt = {});
// Limit of E[S] / ([ng]^{k+1} r^{dk} t^d); inputs also carry the exponent of
// the divergence under the t normalization.
LimitConstant expectation_limit_heavy(const Kernel& h, const RotundBody& body, double alpha, const Vec& theta,
                                      const McOptions& opt = {});

// Components keyed by l in 1..k+1. The critical sum uses chi^{2k+1-l}
// (chi^{2k+2-l} for the lite family, whose critical normalizer is 1).
LimitConstant variance_limit(NormalizerFamily family, RegimeKind regime, int k,
                             const std::map<int, LimitConstant>& components, double chi = 0.0);

LimitConstant covariance_function(const Kernel& h, const RotundBody& body, double alpha, RegimeKind regime,
                                  double chi, const Vec& theta1, const Vec& theta2, const McOptions& opt = {});

// First moment of the edge count of P_n restricted to t H(theta), d = 2,
// by deterministic nested quadrature.
double mecke_edge_mean(const DensityModel& model, const Vec& theta, double n, double t, double r);

struct RateDiagnostic {
  std::vector<double> n, t, r;
  std::vector<double> b_kappa;      // sup_y n rho(B(y, 4 kappa r_n) cap union H_n)
  std::vector<double> h4_norm;      // ||h_n^2||_f
  std::vector<double> variance;
  std::vector<double> bound_rate;   // up to the unknown constant
  std::vector<double> theory_rate;  // per tail class
  LineFit bound_fit, theory_fit;    // against log n
};

RateDiagnostic clt_rate_diagnostic(const DensityModel& model, const std::vector<Vec>& thetas,
                                   const std::vector<double>& weights, const Kernel& h, const std::vector<double>& n,
                                   const std::vector<double>& t, const std::vector<double>& r,
                                   const std::vector<double>& variance, const McOptions& opt = {});

struct ConditionalOrders {
  NormalizerFamily family = NormalizerFamily::LightXi;
  std::vector<double> n, t;
  std::vector<double> variance_order;  // n^{2k+1}, n^{2k+1}/q^{2k}, n^{2k+1}/t^{2dk}
  std::vector<double> dk_order;        // 1/sqrt n, q^{2k}/sqrt n, t^{2dk}/sqrt n
  std::vector<double> mean_order;      // n^{k+1}, n^{k+1}/q^k, n^{k+1}/t^{dk}
};

ConditionalOrders conditional_variance_order(const DensityModel& model, NormalizerFamily family, int k,
                                             const std::vector<double>& n, const std::vector<double>& t);

}  // namespace hsu
