#include "hsu/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "hsu/errors.hpp"
#include "hsu/numeric.hpp"

namespace hsu {

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kPi = std::numbers::pi;

double unit_sphere_area(int d) {
  return 2.0 * std::pow(kPi, 0.5 * d) / std::tgamma(0.5 * d);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::Config, "cannot parse number '" + s + "' in " + context);
  }
}

std::vector<double> parse_list(const std::string& s, const std::string& context) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(parse_number(part, context));
  return out;
}

}  // namespace

RotundBody::RotundBody(int dim) : dim_(dim) {
  if (dim < 2) fail(ErrorKind::InvalidInput, "body dimension must be at least 2");
}

double RotundBody::gauge(const Vec& x) const {
  if (x.size() != dim_) fail(ErrorKind::InvalidInput, "point dimension does not match the body");
  for (int i = 0; i < dim_; ++i)
    if (!std::isfinite(x[i])) fail(ErrorKind::InvalidInput, "non-finite coordinate passed to the gauge");
  return gauge_raw(x.data());
}

void RotundBody::analytic_derivatives(const Vec&, Vec&, Mat&) const {
  fail(ErrorKind::State, "body has no analytic derivatives");
}

GaugeDerivatives RotundBody::derivatives(const Vec& x) const {
  const double g0 = gauge(x);
  const double norm = x.norm();
  if (norm == 0.0) fail(ErrorKind::Domain, "gauge derivatives are undefined at the origin");
  GaugeDerivatives out;
  out.gradient.resize(dim_);
  out.hessian.resize(dim_, dim_);
  if (has_analytic_derivatives()) {
    analytic_derivatives(x, out.gradient, out.hessian);
  } else {
    // Central differences at x/|x|; the gradient is 0-homogeneous and the
    // Hessian (-1)-homogeneous.
    Vec u = x / norm;
    const double h = kFdStep;
    const double gu = gauge_raw(u.data());
    Vec a = u, b = u, c = u, e = u;
    for (int i = 0; i < dim_; ++i) {
      a = u;
      b = u;
      a[i] += h;
      b[i] -= h;
      const double fa = gauge_raw(a.data()), fb = gauge_raw(b.data());
      out.gradient[i] = (fa - fb) / (2 * h);
      out.hessian(i, i) = (fa - 2 * gu + fb) / (h * h);
      for (int j = 0; j < i; ++j) {
        a = u; b = u; c = u; e = u;
        a[i] += h; a[j] += h;
        b[i] += h; b[j] -= h;
        c[i] -= h; c[j] += h;
        e[i] -= h; e[j] -= h;
        const double v = (gauge_raw(a.data()) - gauge_raw(b.data()) - gauge_raw(c.data()) + gauge_raw(e.data())) /
                         (4 * h * h);
        out.hessian(i, j) = out.hessian(j, i) = v;
      }
    }
    out.hessian /= norm;
  }
  if (!out.gradient.allFinite() || !out.hessian.allFinite())
    fail(ErrorKind::Numeric, "gauge derivatives are not finite");
  out.hessian_sq = 2.0 * (out.gradient * out.gradient.transpose() + g0 * out.hessian);
  return out;
}

double RotundBody::compute_volume() const {
  if (dim_ == 2) {
    auto f = [this](double phi) {
      const double u[2] = {std::cos(phi), std::sin(phi)};
      const double g = gauge_raw(u);
      return 0.5 / (g * g);
    };
    double v = 0.0;
    for (int q = 0; q < 4; ++q) v += integrate(f, q * kPi / 2, (q + 1) * kPi / 2, 1e-12);
    return v;
  }
  // vol = |S^{d-1}|/d * E[gamma(U)^{-d}] for U uniform on the sphere.
  Rng rng = make_rng(0x766f6c756d65ULL, static_cast<std::uint64_t>(dim_));
  const std::size_t count = 1u << 18;
  std::vector<double> vals(count);
  Vec u(dim_);
  for (std::size_t s = 0; s < count; ++s) {
    for (int i = 0; i < dim_; ++i) u[i] = standard_normal(rng);
    u.normalize();
    vals[s] = std::pow(gauge_raw(u.data()), -dim_);
  }
  return unit_sphere_area(dim_) / dim_ * mean(vals);
}

double RotundBody::volume() const {
  std::call_once(volume_once_, [this] { volume_ = compute_volume(); });
  return volume_;
}

const Box& RotundBody::bounding_box() const {
  std::call_once(box_once_, [this] {
    box_.lo.resize(dim_);
    box_.hi.resize(dim_);
    for (int i = 0; i < dim_; ++i) {
      Vec e = Vec::Zero(dim_);
      e[i] = 1.0;
      box_.hi[i] = support_function(*this, e);
      box_.lo[i] = -support_function(*this, -e);
    }
  });
  return box_;
}

// Ball

Ball::Ball(int dim, double radius) : RotundBody(dim), radius_(radius) {
  if (!(radius > 0.0) || !std::isfinite(radius)) fail(ErrorKind::InvalidInput, "ball radius must be positive");
}

std::string Ball::tag() const {
  std::ostringstream os;
  os << "ball:r=" << radius_ << ":d=" << dim();
  return os.str();
}

double Ball::gauge_raw(const double* x) const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += x[i] * x[i];
  return std::sqrt(s) / radius_;
}

void Ball::analytic_derivatives(const Vec& x, Vec& grad, Mat& hess) const {
  const double n = x.norm();
  const Vec u = x / n;
  grad = u / radius_;
  hess = (Mat::Identity(dim(), dim()) - u * u.transpose()) / (radius_ * n);
}

double Ball::compute_volume() const {
  return std::pow(kPi, 0.5 * dim()) / std::tgamma(0.5 * dim() + 1.0) * std::pow(radius_, dim());
}

// l^p ellipsoid

LpEllipsoid::LpEllipsoid(int dim, double p, const Mat& linear, double radius)
    : RotundBody(dim), p_(p), linear_(linear), radius_(radius) {
  if (!(p >= 2.0) || !std::isfinite(p)) fail(ErrorKind::InvalidInput, "l^p bodies need p in [2, inf)");
  if (!(radius > 0.0)) fail(ErrorKind::InvalidInput, "l^p radius must be positive");
  if (linear.rows() != dim || linear.cols() != dim) fail(ErrorKind::InvalidInput, "linear map has wrong shape");
  Eigen::FullPivLU<Mat> lu(linear);
  if (!lu.isInvertible()) fail(ErrorKind::InvalidInput, "linear map must be invertible");
  weight_ = lu.inverse() / radius;
  identity_ = linear.isIdentity(0.0);
}

std::string LpEllipsoid::tag() const {
  std::ostringstream os;
  os << "lp:" << p_ << ":r=" << radius_ << ":d=" << dim();
  if (!identity_) {
    os << ":L=";
    for (int i = 0; i < dim(); ++i)
      for (int j = 0; j < dim(); ++j) os << (i || j ? "," : "") << linear_(i, j);
  }
  return os.str();
}

double LpEllipsoid::gauge_raw(const double* x) const {
  const int d = dim();
  double y[16];
  std::vector<double> big;
  double* yy = y;
  if (d > 16) {
    big.resize(d);
    yy = big.data();
  }
  double m = 0.0;
  for (int i = 0; i < d; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += weight_(i, j) * x[j];
    yy[i] = std::abs(s);
    m = std::max(m, yy[i]);
  }
  if (m == 0.0) return 0.0;
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += std::pow(yy[i] / m, p_);
  return m * std::pow(s, 1.0 / p_);
}

void LpEllipsoid::analytic_derivatives(const Vec& x, Vec& grad, Mat& hess) const {
  const int d = dim();
  const Vec y = weight_ * x;
  const double n = gauge_raw(x.data());
  Vec g(d);
  Mat h = Mat::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    const double r = std::abs(y[i]) / n;
    const double sign = y[i] > 0 ? 1.0 : (y[i] < 0 ? -1.0 : 0.0);
    g[i] = sign * std::pow(r, p_ - 1.0);
    h(i, i) = (p_ - 1.0) / n * (p_ == 2.0 ? 1.0 : std::pow(r, p_ - 2.0));
  }
  h -= (p_ - 1.0) / n * g * g.transpose();
  grad = weight_.transpose() * g;
  hess = weight_.transpose() * h * weight_;
}

// Dual norm: h(theta) = ||W^{-T} theta||_q, maximizer y_i = sgn(phi_i) |phi_i|^{q-1} / ||phi||_q^{q-1}.
std::optional<Vec> LpEllipsoid::exact_support_point(const Vec& theta) const {
  const double q = p_ / (p_ - 1.0);
  const Vec phi = linear_.transpose() * theta * radius_;
  const double m = phi.cwiseAbs().maxCoeff();
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += std::pow(std::abs(phi[i]) / m, q);
  const double norm = m * std::pow(s, 1.0 / q);
  Vec y(dim());
  for (int i = 0; i < dim(); ++i)
    y[i] = (phi[i] < 0 ? -1.0 : 1.0) * std::pow(std::abs(phi[i]) / norm, q - 1.0);
  return Vec(linear_ * y * radius_);
}

double LpEllipsoid::compute_volume() const {
  const int d = dim();
  const double unit = std::pow(2.0 * std::tgamma(1.0 + 1.0 / p_), d) / std::tgamma(1.0 + d / p_);
  return std::abs(linear_.determinant()) * std::pow(radius_, d) * unit;
}

// Egg

Egg2d::Egg2d() : RotundBody(2) {}

double Egg2d::gauge_raw(const double* p) const {
  const double x = p[0], y = p[1];
  if (y < 0.0) return 0.5 * std::sqrt(x * x + y * y);
  double s2 = 1.0;  // limit of sin^2(arctan(+-inf)) on the axis x = 0
  if (x != 0.0) {
    const double s = std::sin(std::atan(y / (2.0 * x)));
    s2 = s * s;
  }
  return std::sqrt((x * x + y * y) / (12.0 * s2 + 4.0));
}

// Tabulated

Tabulated2d::Tabulated2d(const std::vector<double>& angles, const std::vector<double>& gauge_values,
                         std::string source)
    : RotundBody(2), source_(std::move(source)) {
  if (angles.size() != gauge_values.size() || angles.size() < 4)
    fail(ErrorKind::InvalidInput, "tabulated body needs at least four direction samples");
  std::vector<std::pair<double, double>> rows;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    if (!(gauge_values[i] > 0.0) || !std::isfinite(gauge_values[i]))
      fail(ErrorKind::InvalidInput, "tabulated gauge values must be positive");
    double phi = std::fmod(angles[i], 2 * kPi);
    if (phi < 0) phi += 2 * kPi;
    rows.emplace_back(phi, gauge_values[i]);
  }
  std::sort(rows.begin(), rows.end());
  for (const auto& [phi, v] : rows) {
    if (!phi_.empty() && phi - phi_.back() < 1e-12)
      fail(ErrorKind::InvalidInput, "tabulated body has duplicate directions");
    phi_.push_back(phi);
    val_.push_back(v);
  }
  period_end_ = phi_.front() + 2 * kPi;
  if (period_end_ - phi_.back() < 1e-12) fail(ErrorKind::InvalidInput, "tabulated body has duplicate directions");
  // Periodic cubic spline: solve the cyclic system for second derivatives.
  const std::size_t n = phi_.size();
  auto gap = [&](std::size_t i) { return (i + 1 < n ? phi_[i + 1] : period_end_) - phi_[i]; };
  Mat a = Mat::Zero(n, n);
  Vec rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t prev = (i + n - 1) % n, next = (i + 1) % n;
    const double hp = gap(prev), hn = gap(i);
    a(i, prev) += hp / 6.0;
    a(i, i) += (hp + hn) / 3.0;
    a(i, next) += hn / 6.0;
    rhs[i] = (val_[next] - val_[i]) / hn - (val_[i] - val_[prev]) / hp;
  }
  const Vec m = a.partialPivLu().solve(rhs);
  m2_.assign(m.data(), m.data() + n);
}

double Tabulated2d::profile(double phi) const {
  phi = std::fmod(phi - phi_.front(), 2 * kPi);
  if (phi < 0) phi += 2 * kPi;
  phi += phi_.front();
  const std::size_t n = phi_.size();
  auto it = std::upper_bound(phi_.begin(), phi_.end(), phi);
  const std::size_t i = static_cast<std::size_t>(it - phi_.begin()) - 1;
  const std::size_t j = (i + 1) % n;
  const double x1 = phi_[i + 0], x2 = i + 1 < n ? phi_[i + 1] : period_end_;
  const double h = x2 - x1;
  const double A = (x2 - phi) / h, B = (phi - x1) / h;
  return A * val_[i] + B * val_[j] + ((A * A * A - A) * m2_[i] + (B * B * B - B) * m2_[j]) * h * h / 6.0;
}

double Tabulated2d::gauge_raw(const double* x) const {
  const double r = std::hypot(x[0], x[1]);
  if (r == 0.0) return 0.0;
  return r * profile(std::atan2(x[1], x[0]));
}

std::shared_ptr<Tabulated2d> Tabulated2d::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open gauge table '" + path + "'");
  std::vector<double> angles, values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto cols = split(line, ',');
    if (cols.size() != 3) fail(ErrorKind::Config, path + ":" + std::to_string(line_no) + ": expected ux,uy,gauge");
    double ux, uy, g;
    try {
      ux = std::stod(cols[0]);
      uy = std::stod(cols[1]);
      g = std::stod(cols[2]);
    } catch (const std::exception&) {
      if (angles.empty()) continue;  // header row
      fail(ErrorKind::Config, path + ":" + std::to_string(line_no) + ": non-numeric entry");
    }
    const double n = std::hypot(ux, uy);
    if (n == 0.0) fail(ErrorKind::Config, path + ":" + std::to_string(line_no) + ": zero direction");
    angles.push_back(std::atan2(uy, ux));
    values.push_back(g / n);
  }
  return std::make_shared<Tabulated2d>(angles, values, path);
}

// Callback

CallbackBody::CallbackBody(int dim, GaugeCallback fn, void* user) : RotundBody(dim), fn_(fn), user_(user) {
  if (!fn) fail(ErrorKind::InvalidInput, "gauge callback is null");
}

BodyPtr make_body(const std::string& spec, int dim) {
  const auto parts = split(spec, ':');
  if (parts.empty()) fail(ErrorKind::Config, "empty body tag");
  const std::string& kind = parts[0];
  if (kind == "table") {
    if (parts.size() < 2) fail(ErrorKind::Config, "table body needs a path: table:<csv>");
    return Tabulated2d::from_csv(spec.substr(6));
  }
  if (kind == "egg2d") {
    if (parts.size() > 1) fail(ErrorKind::Config, "egg2d takes no parameters");
    return std::make_shared<Egg2d>();
  }
  double radius = 1.0;
  double p = 2.0;
  std::optional<Mat> linear;
  std::vector<double> diag, full;
  std::size_t first = 1;
  if (kind == "lp") {
    if (parts.size() < 2) fail(ErrorKind::Config, "lp body needs an exponent: lp:<p>");
    p = parse_number(parts[1], "body tag '" + spec + "'");
    first = 2;
  } else if (kind != "ball") {
    fail(ErrorKind::Config, "unknown body kind '" + kind + "'");
  }
  for (std::size_t i = first; i < parts.size(); ++i) {
    const auto eq = parts[i].find('=');
    if (eq == std::string::npos) fail(ErrorKind::Config, "body option '" + parts[i] + "' must be key=value");
    const std::string key = parts[i].substr(0, eq), value = parts[i].substr(eq + 1);
    const std::string ctx = "body tag '" + spec + "'";
    if (key == "r") radius = parse_number(value, ctx);
    else if (key == "d") dim = static_cast<int>(parse_number(value, ctx));
    else if (key == "diag") diag = parse_list(value, ctx);
    else if (key == "L") full = parse_list(value, ctx);
    else fail(ErrorKind::Config, "unknown body option '" + key + "'");
  }
  if (!diag.empty()) {
    if (static_cast<int>(diag.size()) != dim) fail(ErrorKind::Config, "diag= needs one entry per dimension");
    linear = Eigen::Map<Vec>(diag.data(), dim).asDiagonal();
  }
  if (!full.empty()) {
    if (static_cast<int>(full.size()) != dim * dim) fail(ErrorKind::Config, "L= needs d*d entries (row-major)");
    linear = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(full.data(), dim, dim);
  }
  if (kind == "ball" && !linear) return std::make_shared<Ball>(dim, radius);
  return std::make_shared<LpEllipsoid>(dim, p, linear.value_or(Mat::Identity(dim, dim)), radius);
}

// Support

Vec normalize_direction(const Vec& theta) {
  const double n = theta.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6)
    fail(ErrorKind::InvalidInput, "direction must be a unit vector");
  return theta / n;
}

Vec direction_from_angle(double angle) {
  Vec t(2);
  t << std::cos(angle), std::sin(angle);
  return t;
}

namespace {

double ratio_objective(const RotundBody& body, const Vec& theta, const Vec& u) {
  return theta.dot(u) / body.gauge_raw(u.data());
}

Vec initial_guess_2d(const RotundBody& body, const Vec& theta) {
  auto f = [&](double phi) {
    Vec u = direction_from_angle(phi);
    return ratio_objective(body, theta, u);
  };
  const int grid = 256;
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid; ++i) {
    const double v = f(2 * kPi * i / grid);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  double lo = 2 * kPi * (best - 1) / grid, hi = 2 * kPi * (best + 1) / grid;
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - ratio * (hi - lo), x2 = lo + ratio * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > 1e-12) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = f(x1);
    }
  }
  return direction_from_angle(0.5 * (lo + hi));
}

Vec initial_guess_nd(const RotundBody& body, const Vec& theta) {
  const int d = body.dim();
  Rng rng = make_rng(0x737570706f7274ULL, static_cast<std::uint64_t>(d));
  Vec best = theta;
  double best_val = ratio_objective(body, theta, theta);
  for (int restart = 0; restart < 32; ++restart) {
    Vec u(d);
    if (restart == 0) {
      u = theta;
    } else {
      for (int i = 0; i < d; ++i) u[i] = standard_normal(rng);
      u.normalize();
    }
    double val = ratio_objective(body, theta, u);
    double step = 0.5;
    for (int it = 0; it < 500 && step > 1e-14; ++it) {
      Vec g(d);
      const double h = 1e-7;
      for (int i = 0; i < d; ++i) {
        Vec a = u, b = u;
        a[i] += h;
        b[i] -= h;
        g[i] = (ratio_objective(body, theta, a) - ratio_objective(body, theta, b)) / (2 * h);
      }
      g -= g.dot(u) * u;  // tangent projection
      if (g.norm() < 1e-13) break;
      Vec cand = (u + step * g / g.norm()).normalized();
      const double cv = ratio_objective(body, theta, cand);
      if (cv > val) {
        const double gain = cv - val;
        u = cand;
        val = cv;
        step *= 1.5;
        if (gain < 1e-15) break;
      } else {
        step *= 0.5;
      }
    }
    if (val > best_val) {
      best_val = val;
      best = u;
    }
  }
  return best;
}

}  // namespace

SupportResult support(const RotundBody& body, const Vec& theta_in) {
  if (theta_in.size() != body.dim()) fail(ErrorKind::InvalidInput, "direction dimension does not match the body");
  const Vec theta = normalize_direction(theta_in);
  if (const std::optional<Vec> exact = body.exact_support_point(theta)) {
    SupportResult out;
    out.point = *exact;
    out.zeta = theta.dot(out.point);
    out.residual = (body.derivatives(out.point).gradient - theta / out.zeta).norm();
    return out;
  }
  const Vec u0 = body.dim() == 2 ? initial_guess_2d(body, theta) : initial_guess_nd(body, theta);
  Vec p = u0 / body.gauge_raw(u0.data());
  double zeta = theta.dot(p);

  // Newton polish on gamma(x)^2/2 - <theta, x>, minimized at x = zeta p.
  Vec x = zeta * p;
  auto phi = [&](const Vec& y) {
    const double g = body.gauge_raw(y.data());
    return 0.5 * g * g - theta.dot(y);
  };
  double fx = phi(x);
  for (int it = 0; it < 50; ++it) {
    const GaugeDerivatives der = body.derivatives(x);
    const double g = body.gauge_raw(x.data());
    const Vec grad = g * der.gradient - theta;
    if (grad.norm() < 1e-14) break;
    const Mat hess = 0.5 * der.hessian_sq;
    Eigen::LDLT<Mat> ldlt(hess);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
    const Vec step = ldlt.solve(-grad);
    if (!step.allFinite()) break;
    double s = 1.0;
    bool moved = false;
    for (int k = 0; k < 30; ++k) {
      const Vec cand = x + s * step;
      const double fc = phi(cand);
      if (fc <= fx) {
        x = cand;
        fx = fc;
        moved = true;
        break;
      }
      s *= 0.5;
    }
    if (!moved || (s * step).norm() < 1e-15) break;
  }
  const Vec p_newton = x / body.gauge_raw(x.data());
  if (theta.dot(p_newton) >= zeta) {
    p = p_newton;
    zeta = theta.dot(p);
  }
  if (!(zeta > 0.0)) fail(ErrorKind::Numeric, "support function is not positive; does the body contain the origin?");
  SupportResult out;
  out.zeta = zeta;
  out.point = p;
  const GaugeDerivatives der = body.derivatives(p);
  out.residual = (der.gradient - theta / zeta).norm();
  if (!(out.residual < 1e-4)) {
    std::ostringstream os;
    os << "support point search did not converge (normal residual " << out.residual << ")";
    fail(ErrorKind::Numeric, os.str());
  }
  return out;
}

double support_function(const RotundBody& body, const Vec& theta) { return support(body, theta).zeta; }

Vec support_point(const RotundBody& body, const Vec& theta) { return support(body, theta).point; }

bool Halfspace::contains(const double* x) const noexcept {
  double s = 0.0;
  for (int i = 0; i < theta.size(); ++i) s += theta[i] * x[i];
  return s >= level * scale;
}

Halfspace outer_halfspace(const RotundBody& body, const Vec& theta, double scale) {
  if (!(scale >= 1.0) || !std::isfinite(scale)) fail(ErrorKind::InvalidInput, "halfspace scale must be >= 1");
  Halfspace h;
  h.theta = normalize_direction(theta);
  h.level = support_function(body, h.theta);
  h.scale = scale;
  return h;
}

std::size_t sample_cone_point(const RotundBody& body, Rng& rng, double* out) {
  const Box& box = body.bounding_box();
  const int d = body.dim();
  for (std::size_t tries = 1; tries <= 100000000; ++tries) {
    for (int i = 0; i < d; ++i) out[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * uniform_open(rng);
    const double g = body.gauge_raw(out);
    if (g < 1.0 && g > 0.0) {
      for (int i = 0; i < d; ++i) out[i] /= g;
      return tries;
    }
  }
  fail(ErrorKind::Efficiency, "cone-measure rejection sampler failed to accept");
}

// Initial transformation

AffineFrame initial_transformation(const RotundBody& body, const Vec& theta_in, bool skip_eigen_scaling) {
  const int d = body.dim();
  const SupportResult sup = support(body, theta_in);
  const Vec theta = normalize_direction(theta_in);
  Mat rot = Mat::Identity(d, d);
  const Vec ed = Vec::Unit(d, d - 1);
  const Vec v = theta - ed;
  if (v.norm() > 1e-14) {
    // Householder reflection theta -> e_d, then flip x_1 to restore det = +1.
    rot -= 2.0 * v * v.transpose() / v.squaredNorm();
    rot.row(0) *= -1.0;
  }
  const Vec rp = rot * sup.point;
  Mat m = Mat::Identity(d, d);
  m.block(0, d - 1, d - 1, 1) = rp.head(d - 1);
  m(d - 1, d - 1) = rp[d - 1];
  m = rot.transpose() * m;

  const GaugeDerivatives der = body.derivatives(sup.point);
  Mat b = (m.transpose() * der.hessian * m).topLeftCorner(d - 1, d - 1);
  b = 0.5 * (b + b.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(b);
  const Vec lambda = eig.eigenvalues();
  const double scale = std::max(1.0, b.norm());
  for (int i = 0; i < d - 1; ++i)
    if (!(lambda[i] > 1e-8 * scale)) {
      std::ostringstream os;
      os << "body is not rotund at the support point (horizontal curvature " << lambda[i] << ")";
      fail(ErrorKind::Geometry, os.str());
    }
  Mat horiz = Mat::Identity(d, d);
  if (!skip_eigen_scaling)
    horiz.topLeftCorner(d - 1, d - 1) = eig.eigenvectors() * lambda.cwiseInverse().cwiseSqrt().asDiagonal();

  AffineFrame f;
  f.theta = theta;
  f.A = m * horiz;
  f.A_inv = f.A.inverse();
  f.p = sup.point;
  f.zeta = sup.zeta;
  f.z = std::abs(f.A.determinant());
  f.eigenvalues.assign(lambda.data(), lambda.data() + d - 1);
  f.normal = theta / sup.zeta;
  return f;
}

PositionDiagnostics check_initial_position(const RotundBody& body, const AffineFrame& frame,
                                           const std::vector<double>& radii, int directions) {
  const int d = body.dim();
  PositionDiagnostics out;
  out.radii = radii;
  std::vector<Vec> dirs;
  if (d == 2) {
    dirs = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
  } else {
    Rng rng = make_rng(0x706f736974696f6eULL, static_cast<std::uint64_t>(d));
    for (int i = 0; i < std::max(directions, 1); ++i) {
      Vec u(d - 1);
      for (int j = 0; j < d - 1; ++j) u[j] = standard_normal(rng);
      dirs.push_back(u.normalized());
    }
  }
  const Vec ed = Vec::Unit(d, d - 1);
  const Vec top = frame.A * ed;
  const double base = body.gauge_raw(top.data());
  for (double rho : radii) {
    std::vector<double> row;
    double worst = 0.0;
    for (const Vec& u : dirs) {
      Vec w = ed;
      w.head(d - 1) = rho * u;
      const Vec x = frame.A * w;
      const double ratio = (body.gauge_raw(x.data()) - base) / (0.5 * rho * rho);
      row.push_back(ratio);
      worst = std::max(worst, std::abs(ratio - 1.0));
    }
    out.ratios.push_back(std::move(row));
    out.worst_deviation.push_back(worst);
  }
  // Converging: deviations shrink as the radius shrinks.
  std::vector<std::size_t> order(radii.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return radii[a] > radii[b]; });
  out.converging = !order.empty();
  for (std::size_t i = 1; i < order.size(); ++i)
    if (out.worst_deviation[order[i]] > out.worst_deviation[order[i - 1]] + 1e-9) out.converging = false;
  return out;
}

}  // namespace hsu
