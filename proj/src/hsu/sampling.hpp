#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hsu/density.hpp"

namespace hsu {

struct CloudMeta {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double n = 0.0;
  std::string model;
  std::string halfspace;  // empty when unrestricted
  std::string parent;     // identifies the parent sample a restriction came from
  double acceptance = 1.0;
};

struct PointCloud {
  int dim = 0;
  std::vector<double> coords;  // row-major, size() * dim entries
  CloudMeta meta;

  std::size_t size() const noexcept { return dim ? coords.size() / static_cast<std::size_t>(dim) : 0; }
  const double* point(std::size_t i) const noexcept { return coords.data() + i * static_cast<std::size_t>(dim); }
};

// Inverse-CDF table for the gauge radius conditioned on s >= start, with
// density proportional to g(s) s^{d-1}.
class RadialTable {
 public:
  RadialTable(const DensityModel& model, double start, std::size_t knots = 1u << 16);
  double start() const noexcept { return start_; }
  // log P(gamma(X) >= start) for X ~ f.
  double log_mass() const noexcept { return log_mass_; }
  double draw(Rng& rng) const;
  // Survival P(gamma >= s | gamma >= start) from the table.
  double survival(double s) const;

 private:
  double start_;
  double log_mass_;
  Pchip inverse_;   // s as a function of E = -log survival
  Pchip forward_;   // E as a function of s
  double e_max_, s_max_;
  bool heavy_;
  double alpha_minus_d_ = 0.0;
  double tail_slope_ = 0.0;  // ds/dE at the table end (light)
};

std::int64_t poisson_count(double mean, Rng& rng);

PointCloud sample_poisson(const DensityModel& model, double n, std::uint64_t seed, std::uint64_t stream = 0);

// P_n restricted to {gamma >= table.start()}; an exact parent for every
// halfspace t H(theta) with t >= table.start().
PointCloud sample_shell(const DensityModel& model, const RadialTable& table, double n, std::uint64_t seed,
                        std::uint64_t stream = 0);

// Points of the process with intensity n f_n, f_n = f conditioned on hs.
// Pass a table starting at hs.scale to amortize its construction.
PointCloud sample_conditional(const DensityModel& model, double n, const Halfspace& hs, std::uint64_t seed,
                              std::uint64_t stream = 0, const RadialTable* table = nullptr);

PointCloud restrict_cloud(const PointCloud& cloud, const Halfspace& hs);

std::string halfspace_tag(const Halfspace& hs);

}  // namespace hsu
