#include "hsu/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "hsu/errors.hpp"

namespace hsu {

namespace {

std::string parent_id(const DensityModel& model, std::uint64_t seed, std::uint64_t stream) {
  std::ostringstream os;
  os << model.body().tag() << "|" << model.tag() << "#" << seed << ":" << stream;
  return os.str();
}

}  // namespace

RadialTable::RadialTable(const DensityModel& model, double start, std::size_t knots)
    : start_(start), heavy_(model.kind() == TailKind::Heavy) {
  if (!(start >= 0.0) || !std::isfinite(start)) fail(ErrorKind::InvalidInput, "radial table start must be >= 0");
  if (knots < 16) fail(ErrorKind::InvalidInput, "radial table needs at least 16 knots");
  const int d = model.dim();
  const double l0 = model.log_radial_tail(start);
  if (!std::isfinite(l0)) fail(ErrorKind::Numeric, "radial mass beyond the table start underflows");
  log_mass_ = std::log(d * model.volume()) + model.log_c() + l0;
  const double ref = std::max(start, 1.0);
  const double sigma = heavy_ ? ref : std::min(model.a(ref), ref);
  if (heavy_) alpha_minus_d_ = model.alpha() - d;

  double o_max = sigma;
  for (int it = 0; it < 400 && l0 - model.log_radial_tail(start + o_max) < 60.0; ++it) o_max *= 2.0;
  const double o_min = sigma * 1e-9;

  std::vector<double> s(knots);
  s[0] = start;
  const double ratio = std::log(o_max / o_min) / static_cast<double>(knots - 2);
  for (std::size_t j = 1; j < knots; ++j) s[j] = start + o_min * std::exp(ratio * static_cast<double>(j - 1));
  s[knots - 1] = start + o_max;

  static const GaussRule rule = gauss_legendre(8);
  auto log_piece = [&](double lo, double hi) {
    double vals[8];
    double m = -std::numeric_limits<double>::infinity();
    for (int q = 0; q < 8; ++q) {
      const double u = lo + 0.5 * (hi - lo) * (rule.nodes[q] + 1.0);
      vals[q] = u > 0.0 ? model.log_g0(u) + (d - 1) * std::log(u) : -std::numeric_limits<double>::infinity();
      m = std::max(m, vals[q]);
    }
    if (!std::isfinite(m)) return m;
    double acc = 0.0;
    for (int q = 0; q < 8; ++q) acc += rule.weights[q] * std::exp(vals[q] - m);
    return m + std::log(0.5 * (hi - lo) * acc);
  };
  std::vector<double> log_surv(knots);
  double acc = model.log_radial_tail(s[knots - 1]);
  log_surv[knots - 1] = acc;
  for (std::size_t j = knots - 1; j-- > 0;) {
    acc = log_sum_exp(acc, log_piece(s[j], s[j + 1]));
    log_surv[j] = acc;
  }
  std::vector<double> e, ss;
  e.reserve(knots);
  ss.reserve(knots);
  for (std::size_t j = 0; j < knots; ++j) {
    const double ej = j == 0 ? 0.0 : log_surv[0] - log_surv[j];
    if (!e.empty() && !(ej > e.back())) continue;
    e.push_back(ej);
    ss.push_back(s[j]);
  }
  if (e.size() < 8) fail(ErrorKind::Numeric, "radial table collapsed; generator too concentrated");
  e_max_ = e.back();
  s_max_ = ss.back();
  if (!heavy_) tail_slope_ = model.a(s_max_);
  inverse_ = Pchip(e, ss);
  forward_ = Pchip(ss, e);
}

double RadialTable::draw(Rng& rng) const {
  const double e = -std::log(uniform_open(rng));
  if (e <= e_max_) return inverse_(e);
  if (heavy_) return s_max_ * std::exp((e - e_max_) / alpha_minus_d_);
  return s_max_ + (e - e_max_) * tail_slope_;
}

double RadialTable::survival(double s) const {
  if (s <= start_) return 1.0;
  if (s <= s_max_) return std::exp(-forward_(s));
  if (heavy_) return std::exp(-e_max_) * std::pow(s / s_max_, -alpha_minus_d_);
  return std::exp(-e_max_ - (s - s_max_) / tail_slope_);
}

std::int64_t poisson_count(double mean, Rng& rng) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) fail(ErrorKind::InvalidInput, "Poisson mean must be finite and >= 0");
  if (mean > 1e10) fail(ErrorKind::Budget, "Poisson mean too large to simulate point by point");
  if (mean == 0.0) return 0;
  std::poisson_distribution<std::int64_t> dist(mean);
  return dist(rng);
}

namespace {

PointCloud sample_from_table(const DensityModel& model, const RadialTable& table, double mean, std::uint64_t seed,
                             std::uint64_t stream) {
  Rng rng = make_rng(seed, stream, 0x706f6973ULL);
  const std::int64_t count = poisson_count(mean, rng);
  const int d = model.dim();
  PointCloud cloud;
  cloud.dim = d;
  cloud.coords.resize(static_cast<std::size_t>(count) * d);
  std::vector<double> w(d);
  for (std::int64_t i = 0; i < count; ++i) {
    const double s = table.draw(rng);
    sample_cone_point(model.body(), rng, w.data());
    for (int j = 0; j < d; ++j) cloud.coords[static_cast<std::size_t>(i) * d + j] = s * w[j];
  }
  cloud.meta.seed = seed;
  cloud.meta.stream = stream;
  cloud.meta.model = model.tag();
  cloud.meta.parent = parent_id(model, seed, stream);
  return cloud;
}

}  // namespace

PointCloud sample_poisson(const DensityModel& model, double n, std::uint64_t seed, std::uint64_t stream) {
  if (!(n > 0.0)) fail(ErrorKind::InvalidInput, "intensity n must be positive");
  const RadialTable table(model, 0.0);
  PointCloud cloud = sample_from_table(model, table, n, seed, stream);
  cloud.meta.n = n;
  return cloud;
}

PointCloud sample_shell(const DensityModel& model, const RadialTable& table, double n, std::uint64_t seed,
                        std::uint64_t stream) {
  if (!(n > 0.0)) fail(ErrorKind::InvalidInput, "intensity n must be positive");
  const double mean = std::exp(std::log(n) + table.log_mass());
  PointCloud cloud = sample_from_table(model, table, mean, seed, stream);
  cloud.meta.n = n;
  return cloud;
}

PointCloud sample_conditional(const DensityModel& model, double n, const Halfspace& hs, std::uint64_t seed,
                              std::uint64_t stream, const RadialTable* table) {
  if (!(n > 0.0)) fail(ErrorKind::InvalidInput, "intensity n must be positive");
  if (!(hs.scale >= 1.0)) fail(ErrorKind::InvalidInput, "conditional sampling needs t >= 1");
  std::optional<RadialTable> own;
  if (!table || table->start() != hs.scale) {
    own.emplace(model, hs.scale);
    table = &*own;
  }
  Rng rng = make_rng(seed, stream, 0x636f6e64ULL);
  const std::int64_t count = poisson_count(n, rng);
  const int d = model.dim();
  PointCloud cloud;
  cloud.dim = d;
  cloud.coords.reserve(static_cast<std::size_t>(count) * d);
  std::vector<double> w(d), x(d);
  const double thr = hs.threshold();
  std::uint64_t trials = 0, accepted = 0;
  for (std::int64_t i = 0; i < count; ++i) {
    for (;;) {
      ++trials;
      const double s = table->draw(rng);
      sample_cone_point(model.body(), rng, w.data());
      double proj = 0.0;
      for (int j = 0; j < d; ++j) {
        x[j] = s * w[j];
        proj += hs.theta[j] * x[j];
      }
      if (proj >= thr) break;
      if (trials >= 1000000 && static_cast<double>(accepted + 1) < 1e-6 * static_cast<double>(trials))
        fail(ErrorKind::Efficiency,
             "halfspace acceptance rate below 1e-6; use a smaller threshold or a finer radial table");
    }
    ++accepted;
    cloud.coords.insert(cloud.coords.end(), x.begin(), x.end());
  }
  cloud.meta.seed = seed;
  cloud.meta.stream = stream;
  cloud.meta.n = n;
  cloud.meta.model = model.tag();
  cloud.meta.halfspace = halfspace_tag(hs);
  cloud.meta.parent = parent_id(model, seed, stream) + "|conditional";
  cloud.meta.acceptance = trials ? static_cast<double>(accepted) / static_cast<double>(trials) : 1.0;
  return cloud;
}

PointCloud restrict_cloud(const PointCloud& cloud, const Halfspace& hs) {
  PointCloud out;
  out.dim = cloud.dim;
  out.meta = cloud.meta;
  out.meta.halfspace = halfspace_tag(hs);
  if (cloud.dim != 0 && hs.theta.size() != cloud.dim)
    fail(ErrorKind::InvalidInput, "halfspace dimension does not match the cloud");
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (hs.contains(cloud.point(i))) out.coords.insert(out.coords.end(), cloud.point(i), cloud.point(i) + cloud.dim);
  return out;
}

std::string halfspace_tag(const Halfspace& hs) {
  std::ostringstream os;
  os.precision(10);
  os << "theta=(";
  for (int i = 0; i < hs.theta.size(); ++i) os << (i ? "," : "") << hs.theta[i];
  os << "),L=" << hs.level << ",t=" << hs.scale;
  return os.str();
}

}  // namespace hsu
