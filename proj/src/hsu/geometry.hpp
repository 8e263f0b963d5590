#pragma once

#include <Eigen/Dense>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hsu/numeric.hpp"

namespace hsu {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct GaugeDerivatives {
  Vec gradient;        // of gamma
  Mat hessian;         // of gamma
  Mat hessian_sq;      // of gamma^2
};

struct Box {
  Vec lo, hi;
};

// Convex body containing the origin, described by its gauge function.
class RotundBody {
 public:
  explicit RotundBody(int dim);
  virtual ~RotundBody() = default;
  RotundBody(const RotundBody&) = delete;
  RotundBody& operator=(const RotundBody&) = delete;

  int dim() const noexcept { return dim_; }
  virtual std::string tag() const = 0;

  // Hot path: no validation.
  virtual double gauge_raw(const double* x) const = 0;
  double gauge(const Vec& x) const;

  virtual bool has_analytic_derivatives() const { return false; }
  GaugeDerivatives derivatives(const Vec& x) const;

  // Closed-form support point for unit theta, if the body has one.
  virtual std::optional<Vec> exact_support_point(const Vec&) const { return std::nullopt; }

  double volume() const;
  const Box& bounding_box() const;

 protected:
  virtual void analytic_derivatives(const Vec& x, Vec& grad, Mat& hess) const;
  virtual double compute_volume() const;

 private:
  int dim_;
  mutable std::once_flag volume_once_, box_once_;
  mutable double volume_ = 0.0;
  mutable Box box_;
};

using BodyPtr = std::shared_ptr<const RotundBody>;

class Ball final : public RotundBody {
 public:
  Ball(int dim, double radius);
  std::string tag() const override;
  double gauge_raw(const double* x) const override;
  bool has_analytic_derivatives() const override { return true; }
  std::optional<Vec> exact_support_point(const Vec& theta) const override { return Vec(radius_ * theta); }
  double radius() const noexcept { return radius_; }

 protected:
  void analytic_derivatives(const Vec& x, Vec& grad, Mat& hess) const override;
  double compute_volume() const override;

 private:
  double radius_;
};

// {x : ||L^{-1} x||_p < r}
class LpEllipsoid final : public RotundBody {
 public:
  LpEllipsoid(int dim, double p, const Mat& linear, double radius);
  std::string tag() const override;
  double gauge_raw(const double* x) const override;
  bool has_analytic_derivatives() const override { return true; }
  std::optional<Vec> exact_support_point(const Vec& theta) const override;

 protected:
  void analytic_derivatives(const Vec& x, Vec& grad, Mat& hess) const override;
  double compute_volume() const override;

 private:
  double p_;
  Mat linear_, weight_;  // weight = L^{-1} / r
  double radius_;
  bool identity_;
};

// Planar egg: the printed piecewise gauge, upper branch via the arctan form.
class Egg2d final : public RotundBody {
 public:
  Egg2d();
  std::string tag() const override { return "egg2d"; }
  double gauge_raw(const double* x) const override;
};

// Planar star body from tabulated gauge values on the unit circle, joined by a
// periodic cubic spline in the polar angle.
class Tabulated2d final : public RotundBody {
 public:
  Tabulated2d(const std::vector<double>& angles, const std::vector<double>& gauge_values, std::string source);
  static std::shared_ptr<Tabulated2d> from_csv(const std::string& path);
  std::string tag() const override { return "table:" + source_; }
  double gauge_raw(const double* x) const override;

 private:
  double profile(double phi) const;
  std::vector<double> phi_, val_, m2_;  // knots, values, second derivatives
  double period_end_;
  std::string source_;
};

using GaugeCallback = double (*)(const double* x, void* user);

class CallbackBody final : public RotundBody {
 public:
  CallbackBody(int dim, GaugeCallback fn, void* user);
  std::string tag() const override { return "user"; }
  double gauge_raw(const double* x) const override { return fn_(x, user_); }

 private:
  GaugeCallback fn_;
  void* user_;
};

// Parses "ball", "ball:r=2", "lp:4:r=1", "egg2d", "table:<csv>".
BodyPtr make_body(const std::string& spec, int dim = 2);

struct SupportResult {
  double zeta = 0.0;  // support function value
  Vec point;          // support point p(theta), gamma(p) = 1
  double residual = 0.0;
};

Vec normalize_direction(const Vec& theta);
Vec direction_from_angle(double angle);

SupportResult support(const RotundBody& body, const Vec& theta);
double support_function(const RotundBody& body, const Vec& theta);
Vec support_point(const RotundBody& body, const Vec& theta);

struct Halfspace {
  Vec theta;
  double level = 0.0;
  double scale = 1.0;
  bool contains(const double* x) const noexcept;
  bool contains(const Vec& x) const noexcept { return contains(x.data()); }
  double threshold() const noexcept { return level * scale; }
};

Halfspace outer_halfspace(const RotundBody& body, const Vec& theta, double scale);

// Point of the boundary distributed by the cone measure: uniform in D by
// rejection from the bounding box, then radially projected. Writes dim()
// coordinates to out and returns the number of proposals used.
std::size_t sample_cone_point(const RotundBody& body, Rng& rng, double* out);

struct AffineFrame {
  Vec theta;
  Mat A, A_inv;
  Vec p;
  double zeta = 0.0;
  double z = 0.0;
  std::vector<double> eigenvalues;
  Vec normal;  // grad gamma(p) = theta / zeta
};

// When skip_eigen_scaling is set the horizontal normalization is omitted;
// only useful as a negative control for the position check.
AffineFrame initial_transformation(const RotundBody& body, const Vec& theta, bool skip_eigen_scaling = false);

struct PositionDiagnostics {
  std::vector<double> radii;
  std::vector<std::vector<double>> ratios;  // per radius, per probe direction
  std::vector<double> worst_deviation;      // max |ratio - 1| per radius
  bool converging = false;
};

PositionDiagnostics check_initial_position(const RotundBody& body, const AffineFrame& frame,
                                           const std::vector<double>& radii, int directions = 8);

}  // namespace hsu
