#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "hsu/sampling.hpp"

namespace hsu {

// Symmetric, translation invariant, local, bounded kernel on (k+1)-tuples.
// Indicator conditions are closed (distance <= r).
class Kernel {
 public:
  virtual ~Kernel() = default;
  virtual int order() const = 0;      // k
  virtual double kappa() const = 0;   // h_1 > 0 implies diameter <= kappa
  virtual double bound() const = 0;   // M
  virtual std::string kind() const = 0;
  virtual bool positivity_guaranteed() const { return true; }
  // pts[i] points to d coordinates; no validation.
  virtual double eval(const double* const* pts, int d, double r) const = 0;

  // Validating entry point: k+1 distinct points of equal dimension.
  double eval_checked(const std::vector<Vec>& tuple, double r) const;
  double c0(int d = 2) const;
};

using KernelPtr = std::shared_ptr<const Kernel>;

class EdgeKernel final : public Kernel {
 public:
  int order() const override { return 1; }
  double kappa() const override { return 1.0; }
  double bound() const override { return 1.0; }
  std::string kind() const override { return "edge"; }
  double eval(const double* const* pts, int d, double r) const override;
};

class VrKernel final : public Kernel {
 public:
  explicit VrKernel(int k);
  int order() const override { return k_; }
  double kappa() const override { return 1.0; }
  double bound() const override { return 1.0; }
  std::string kind() const override { return "vr"; }
  double eval(const double* const* pts, int d, double r) const override;

 private:
  int k_;
};

class CechKernel final : public Kernel {
 public:
  explicit CechKernel(int k);
  int order() const override { return k_; }
  double kappa() const override { return 1.0; }
  double bound() const override { return 1.0; }
  std::string kind() const override { return "cech"; }
  double eval(const double* const* pts, int d, double r) const override;

 private:
  int k_;
};

// Copies of a template graph in the geometric graph on the tuple. The
// non-induced count is M-bounded and positive on any tuple whose complete
// distance graph is present; the induced variant is an isomorphism indicator.
class SubgraphKernel final : public Kernel {
 public:
  SubgraphKernel(std::vector<std::pair<int, int>> edges, bool induced);
  int order() const override { return vertices_ - 1; }
  double kappa() const override { return kappa_; }
  double bound() const override { return bound_; }
  std::string kind() const override { return induced_ ? "induced" : "noninduced"; }
  bool positivity_guaranteed() const override { return !induced_; }
  double eval(const double* const* pts, int d, double r) const override;
  std::size_t automorphisms() const noexcept { return automorphisms_; }

 private:
  int vertices_;
  std::vector<std::pair<int, int>> edges_;
  bool induced_;
  std::vector<std::vector<int>> perms_;
  std::vector<std::uint8_t> template_adj_;
  std::size_t automorphisms_ = 0;
  double kappa_ = 1.0, bound_ = 1.0;
};

class LinearCombinationKernel final : public Kernel {
 public:
  explicit LinearCombinationKernel(std::vector<std::pair<double, KernelPtr>> terms);
  int order() const override { return k_; }
  double kappa() const override { return kappa_; }
  double bound() const override { return bound_; }
  std::string kind() const override { return "combination"; }
  bool positivity_guaranteed() const override;
  double eval(const double* const* pts, int d, double r) const override;

 private:
  std::vector<std::pair<double, KernelPtr>> terms_;
  int k_ = 1;
  double kappa_ = 0.0, bound_ = 0.0;
};

using KernelFunction = std::function<double(const double* const* pts, int d, double r)>;

class CustomKernel final : public Kernel {
 public:
  CustomKernel(int k, double kappa, double bound, KernelFunction fn, bool positive = false);
  int order() const override { return k_; }
  double kappa() const override { return kappa_; }
  double bound() const override { return bound_; }
  std::string kind() const override { return "custom"; }
  bool positivity_guaranteed() const override { return positive_; }
  double eval(const double* const* pts, int d, double r) const override { return fn_(pts, d, r); }

 private:
  int k_;
  double kappa_, bound_;
  KernelFunction fn_;
  bool positive_;
};

struct KernelSpec {
  std::string kind = "edge";
  int k = 1;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::pair<double, KernelSpec>> terms;
};

KernelPtr make_kernel(const KernelSpec& spec);

// Radius of the smallest ball enclosing the points (Welzl).
double miniball_radius(const double* const* pts, int count, int d);

struct StatisticValue {
  double value = 0.0;
  std::uint64_t tuples = 0;  // candidate subsets examined
  double r = 0.0;
};

struct ComputeOptions {
  std::uint64_t budget = 2'000'000'000ULL;
  int threads = 1;
};

StatisticValue compute_S(const PointCloud& cloud, const Kernel& kernel, double r, const ComputeOptions& opt = {});
StatisticValue compute_S_bruteforce(const PointCloud& cloud, const Kernel& kernel, double r);

double weighted_combination(const std::vector<PointCloud>& clouds, const Kernel& kernel, double r,
                            const std::vector<double>& weights, const ComputeOptions& opt = {});

}  // namespace hsu
