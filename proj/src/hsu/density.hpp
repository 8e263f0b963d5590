#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hsu/geometry.hpp"
#include "hsu/numeric.hpp"

namespace hsu {

enum class TailKind { Light, Heavy };

struct GeneratorSpec {
  TailKind kind = TailKind::Light;
  // light
  std::string psi = "t";           // "t", "t^2/2" or "table"
  std::vector<double> table_t;     // knots for a tabulated psi
  std::vector<double> table_psi;
  // heavy
  double alpha = 5.0;
  std::string profile = "one-plus";  // (1+t)^-alpha, or "pareto": min(1, t^-alpha)
};

// Homothetic density f = g(gamma(x)), normalized on construction.
class DensityModel {
 public:
  DensityModel(BodyPtr body, GeneratorSpec spec);

  const RotundBody& body() const noexcept { return *body_; }
  const BodyPtr& body_ptr() const noexcept { return body_; }
  const GeneratorSpec& spec() const noexcept { return spec_; }
  TailKind kind() const noexcept { return spec_.kind; }
  int dim() const noexcept { return body_->dim(); }
  double alpha() const noexcept { return spec_.alpha; }
  std::string tag() const;

  double normalizer_constant() const noexcept { return c_; }
  double log_c() const noexcept { return log_c_; }
  double volume() const noexcept { return volume_; }

  // Unnormalized log generator (g / C).
  double log_g0(double s) const;
  double log_g(double s) const { return log_c_ + log_g0(s); }
  double g(double s) const { return std::exp(log_g(s)); }
  double density(const Vec& x) const;
  double log_density_raw(const double* x) const { return log_g(body_->gauge_raw(x)); }

  // Light tails.
  double psi(double t) const;
  double psi_prime(double t) const;
  double a(double t) const { return 1.0 / psi_prime(t); }
  double b(double t) const { return std::sqrt(a(t) * t); }
  double q(double t) const;  // (a t)^{(d-1)/2} a

  // log of int_{s0}^inf g0(s) s^{d-1} ds.
  double log_radial_tail(double s0) const;
  // d vol(D) int_0^inf g(s) s^{d-1} ds; equals one after normalization.
  double radial_mass() const;

 private:
  BodyPtr body_;
  GeneratorSpec spec_;
  Pchip table_;
  double table_lo_slope_ = 0.0, table_hi_slope_ = 0.0;
  double volume_ = 0.0;
  double c_ = 0.0, log_c_ = 0.0;
};

enum class LimitClass { Zero, Finite, Infinite };
const char* limit_class_name(LimitClass c) noexcept;

struct SequenceLimit {
  LimitClass cls = LimitClass::Finite;
  double value = 0.0;  // finite limit estimate; 0 or inf otherwise
};

// Decides 0 / finite / infinity from the tail of a finite probe sequence.
SequenceLimit classify_limit(const std::vector<double>& seq);

struct TailParams {
  std::vector<double> t, r;
  std::vector<double> a, b, q;
  SequenceLimit xi, beta;
  double r_limit = 0.0;
  double alpha = 0.0;  // heavy tails
  bool heavy = false;
  bool xi_analytic = false;
};

struct TailOverride {
  std::optional<double> xi, beta;  // +inf allowed
};

TailParams tail_params(const DensityModel& model, const std::vector<double>& t_seq, const std::vector<double>& r_seq,
                       const TailOverride& override_limits = {});

struct HalfspaceMass {
  double asymptotic = 0.0;
  double numeric = 0.0;
  double log_asymptotic = 0.0;
  double log_numeric = 0.0;
  double numeric_error = 0.0;  // relative
};

// int_{A} gamma(x)^{-e} dx over A = H(theta_1) cap H(theta_2) (theta_2 may equal theta_1).
double gauge_power_integral(const RotundBody& body, const Vec& theta1, const Vec& theta2, double exponent,
                            std::uint64_t seed = 1, std::size_t samples = 1u << 18, double* se = nullptr);

HalfspaceMass halfspace_mass(const DensityModel& model, const AffineFrame& frame, double t);

enum class RegimeKind { Sparse, Critical, Dense };
const char* regime_name(RegimeKind r) noexcept;

struct Regime {
  RegimeKind kind = RegimeKind::Critical;
  double chi = 0.0;
};

// Family of the normalizing sequence.
enum class NormalizerFamily { LightXi, Lite, Heavy };
NormalizerFamily normalizer_family(const DensityModel& model, const TailParams& tail);

// Regime driving quantity: n g(t) r^d, or n g(t) q(t) for the lite family.
double regime_driver(const DensityModel& model, NormalizerFamily family, double n, double t, double r);

Regime classify_regime(const DensityModel& model, NormalizerFamily family, const std::vector<double>& n,
                       const std::vector<double>& t, const std::vector<double>& r);

double variance_normalizer(const DensityModel& model, NormalizerFamily family, RegimeKind regime, int k, double n,
                           double t, double r);
// Normalizer of the mean: [ng]^{k+1} r^{dk} q, [ngq]^{k+1}, or the heavy
// analogue with t^d (t_scaled = false gives the variant with t).
double mean_normalizer(const DensityModel& model, NormalizerFamily family, int k, double n, double t, double r,
                       bool t_scaled = true);

struct PotterReport {
  double epsilon = 0.0;
  double alpha = 0.0;
  std::optional<double> t0;
  std::size_t violations = 0;        // (t, x) pairs failing the bound on the grid
  std::size_t monotone_failures = 0; // increases of g on the grid
  std::vector<double> t_grid;
  std::vector<bool> passes_from;     // all t' >= t pass
  bool pass = false;
};

PotterReport potter_check(const std::function<double(double)>& g, double alpha, double epsilon);
PotterReport potter_check(const DensityModel& model, double epsilon);

}  // namespace hsu
