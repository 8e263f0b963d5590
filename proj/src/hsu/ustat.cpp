#include "hsu/ustat.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <queue>
#include <unordered_map>

#include "hsu/errors.hpp"
#include "hsu/numeric.hpp"

namespace hsu {

namespace {

inline double dist2(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

}  // namespace

double Kernel::eval_checked(const std::vector<Vec>& tuple, double r) const {
  if (static_cast<int>(tuple.size()) != order() + 1)
    fail(ErrorKind::InvalidInput, "kernel needs exactly k+1 points");
  if (!(r >= 0.0) || !std::isfinite(r)) fail(ErrorKind::InvalidInput, "kernel radius must be finite and >= 0");
  const int d = static_cast<int>(tuple[0].size());
  std::vector<const double*> pts;
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    if (tuple[i].size() != d) fail(ErrorKind::InvalidInput, "tuple points differ in dimension");
    if (!tuple[i].allFinite()) fail(ErrorKind::InvalidInput, "tuple contains non-finite coordinates");
    for (std::size_t j = 0; j < i; ++j)
      if (tuple[i] == tuple[j]) fail(ErrorKind::InvalidInput, "invalid tuple: duplicate points");
    pts.push_back(tuple[i].data());
  }
  return eval(pts.data(), d, r);
}

double Kernel::c0(int d) const {
  const std::vector<double> zero(static_cast<std::size_t>(d), 0.0);
  std::vector<const double*> pts(static_cast<std::size_t>(order() + 1), zero.data());
  return eval(pts.data(), d, 1.0);
}

double EdgeKernel::eval(const double* const* pts, int d, double r) const {
  return dist2(pts[0], pts[1], d) <= r * r ? 1.0 : 0.0;
}

VrKernel::VrKernel(int k) : k_(k) {
  if (k < 1) fail(ErrorKind::InvalidInput, "simplex kernels need k >= 1");
}

double VrKernel::eval(const double* const* pts, int d, double r) const {
  const double r2 = r * r;
  for (int i = 0; i <= k_; ++i)
    for (int j = 0; j < i; ++j)
      if (dist2(pts[i], pts[j], d) > r2) return 0.0;
  return 1.0;
}

CechKernel::CechKernel(int k) : k_(k) {
  if (k < 1) fail(ErrorKind::InvalidInput, "simplex kernels need k >= 1");
}

double CechKernel::eval(const double* const* pts, int d, double r) const {
  // Closed balls of radius r/2 meet iff the minimal enclosing ball has radius <= r/2.
  const double rad = miniball_radius(pts, k_ + 1, d);
  return rad <= 0.5 * r * (1.0 + 1e-12) ? 1.0 : 0.0;
}

// Welzl's algorithm on a handful of points.

namespace {

struct Sphere {
  std::vector<double> c;
  double r2 = -1.0;
};

Sphere sphere_through(const std::vector<const double*>& support, int d) {
  Sphere s;
  const std::size_t m = support.size();
  if (m == 0) return s;
  s.c.assign(support[0], support[0] + d);
  s.r2 = 0.0;
  if (m == 1) return s;
  Mat a(m - 1, m - 1);
  Vec b(m - 1);
  std::vector<Vec> dirs(m - 1, Vec(d));
  for (std::size_t i = 1; i < m; ++i)
    for (int j = 0; j < d; ++j) dirs[i - 1][j] = support[i][j] - support[0][j];
  for (std::size_t i = 0; i + 1 < m; ++i) {
    for (std::size_t j = 0; j + 1 < m; ++j) a(i, j) = 2.0 * dirs[i].dot(dirs[j]);
    b[i] = dirs[i].squaredNorm();
  }
  const Vec lambda = a.colPivHouseholderQr().solve(b);
  for (std::size_t i = 0; i + 1 < m; ++i)
    for (int j = 0; j < d; ++j) s.c[j] += lambda[i] * dirs[i][j];
  s.r2 = dist2(s.c.data(), support[0], d);
  return s;
}

bool inside(const Sphere& s, const double* p, int d) {
  if (s.r2 < 0.0) return false;
  return dist2(s.c.data(), p, d) <= s.r2 * (1.0 + 1e-10) + 1e-300;
}

Sphere welzl(const double* const* pts, int n, std::vector<const double*>& support, int d) {
  if (n == 0 || static_cast<int>(support.size()) == d + 1) return sphere_through(support, d);
  Sphere s = welzl(pts, n - 1, support, d);
  if (inside(s, pts[n - 1], d)) return s;
  support.push_back(pts[n - 1]);
  s = welzl(pts, n - 1, support, d);
  support.pop_back();
  return s;
}

}  // namespace

double miniball_radius(const double* const* pts, int count, int d) {
  if (count <= 0) return 0.0;
  std::vector<const double*> support;
  const Sphere s = welzl(pts, count, support, d);
  return std::sqrt(std::max(s.r2, 0.0));
}

// Subgraph counts

SubgraphKernel::SubgraphKernel(std::vector<std::pair<int, int>> edges, bool induced) : induced_(induced) {
  if (edges.empty()) fail(ErrorKind::InvalidInput, "subgraph template needs at least one edge");
  int maxv = 0;
  for (auto& [u, v] : edges) {
    if (u < 0 || v < 0) fail(ErrorKind::InvalidInput, "template vertices must be non-negative");
    if (u == v) fail(ErrorKind::InvalidInput, "template has a self-loop");
    if (u > v) std::swap(u, v);
    maxv = std::max(maxv, v);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges_ = edges;
  vertices_ = maxv + 1;
  if (vertices_ > 8) fail(ErrorKind::InvalidInput, "subgraph templates are limited to 8 vertices");
  const int n = vertices_;
  template_adj_.assign(static_cast<std::size_t>(n * n), 0);
  for (const auto& [u, v] : edges_) template_adj_[u * n + v] = template_adj_[v * n + u] = 1;
  // Graph diameter by BFS; the template must be connected for locality.
  int diameter = 0;
  for (int s = 0; s < n; ++s) {
    std::vector<int> dist(n, -1);
    std::queue<int> q;
    dist[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const int x = q.front();
      q.pop();
      for (int y = 0; y < n; ++y)
        if (template_adj_[x * n + y] && dist[y] < 0) {
          dist[y] = dist[x] + 1;
          q.push(y);
        }
    }
    for (int y = 0; y < n; ++y) {
      if (dist[y] < 0) fail(ErrorKind::InvalidInput, "subgraph template must be connected");
      diameter = std::max(diameter, dist[y]);
    }
  }
  kappa_ = diameter;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    perms_.push_back(perm);
    bool aut = true;
    for (const auto& [u, v] : edges_)
      if (!template_adj_[perm[u] * n + perm[v]]) {
        aut = false;
        break;
      }
    if (aut) ++automorphisms_;
  } while (std::next_permutation(perm.begin(), perm.end()));
  bound_ = induced_ ? 1.0 : static_cast<double>(perms_.size()) / static_cast<double>(automorphisms_);
}

double SubgraphKernel::eval(const double* const* pts, int d, double r) const {
  const int n = vertices_;
  std::uint8_t adj[64] = {};
  const double r2 = r * r;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) adj[i * n + j] = adj[j * n + i] = dist2(pts[i], pts[j], d) <= r2;
  if (induced_) {
    for (const auto& perm : perms_) {
      bool iso = true;
      for (int u = 0; u < n && iso; ++u)
        for (int v = 0; v < u; ++v)
          if (template_adj_[u * n + v] != adj[perm[u] * n + perm[v]]) {
            iso = false;
            break;
          }
      if (iso) return 1.0;
    }
    return 0.0;
  }
  std::size_t count = 0;
  for (const auto& perm : perms_) {
    bool ok = true;
    for (const auto& [u, v] : edges_)
      if (!adj[perm[u] * n + perm[v]]) {
        ok = false;
        break;
      }
    if (ok) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(automorphisms_);
}

LinearCombinationKernel::LinearCombinationKernel(std::vector<std::pair<double, KernelPtr>> terms)
    : terms_(std::move(terms)) {
  if (terms_.empty()) fail(ErrorKind::InvalidInput, "linear combination needs at least one term");
  k_ = terms_[0].second->order();
  for (const auto& [a, h] : terms_) {
    if (!h) fail(ErrorKind::InvalidInput, "null kernel in combination");
    if (!(a >= 0.0)) fail(ErrorKind::InvalidInput, "combination weights must be non-negative");
    if (h->order() != k_) fail(ErrorKind::InvalidInput, "combined kernels must have the same order");
    if (a > 0.0) kappa_ = std::max(kappa_, h->kappa());
    bound_ += a * h->bound();
  }
  if (kappa_ == 0.0) kappa_ = 1.0;
}

bool LinearCombinationKernel::positivity_guaranteed() const {
  for (const auto& [a, h] : terms_)
    if (a > 0.0 && h->positivity_guaranteed()) return true;
  return false;
}

double LinearCombinationKernel::eval(const double* const* pts, int d, double r) const {
  double s = 0.0;
  for (const auto& [a, h] : terms_)
    if (a > 0.0) s += a * h->eval(pts, d, r);
  return s;
}

CustomKernel::CustomKernel(int k, double kappa, double bound, KernelFunction fn, bool positive)
    : k_(k), kappa_(kappa), bound_(bound), fn_(std::move(fn)), positive_(positive) {
  if (k < 1) fail(ErrorKind::InvalidInput, "kernel order must be >= 1");
  if (!(kappa > 0.0) || !(bound >= 0.0)) fail(ErrorKind::InvalidInput, "kernel needs kappa > 0 and M >= 0");
  if (!fn_) fail(ErrorKind::InvalidInput, "custom kernel needs an evaluator");
}

KernelPtr make_kernel(const KernelSpec& spec) {
  if (spec.kind == "edge") return std::make_shared<EdgeKernel>();
  if (spec.kind == "vr") return std::make_shared<VrKernel>(spec.k);
  if (spec.kind == "cech") return std::make_shared<CechKernel>(spec.k);
  if (spec.kind == "noninduced" || spec.kind == "induced")
    return std::make_shared<SubgraphKernel>(spec.edges, spec.kind == "induced");
  if (spec.kind == "combination") {
    std::vector<std::pair<double, KernelPtr>> terms;
    for (const auto& [a, s] : spec.terms) terms.emplace_back(a, make_kernel(s));
    return std::make_shared<LinearCombinationKernel>(std::move(terms));
  }
  fail(ErrorKind::Config, "unknown kernel kind '" + spec.kind + "'");
}

// Enumeration

namespace {

constexpr int kMaxGridDim = 8;
using CellKey = std::array<std::int64_t, kMaxGridDim>;

struct CellHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (std::int64_t v : k) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

StatisticValue compute_S(const PointCloud& cloud, const Kernel& kernel, double r, const ComputeOptions& opt) {
  if (!(r > 0.0) || !std::isfinite(r)) fail(ErrorKind::InvalidInput, "radius must be positive");
  StatisticValue out;
  out.r = r;
  const int k = kernel.order();
  const std::size_t n = cloud.size();
  const int d = cloud.dim;
  if (n < static_cast<std::size_t>(k + 1)) return out;
  if (d > kMaxGridDim) fail(ErrorKind::InvalidInput, "grid enumeration supports dimension <= 8");
  const double reach = kernel.kappa() * r * (1.0 + 1e-9);
  const double reach2 = reach * reach;
  const double width = reach;

  std::unordered_map<CellKey, std::vector<std::uint32_t>, CellHash> grid;
  std::vector<CellKey> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    CellKey key{};
    const double* p = cloud.point(i);
    for (int j = 0; j < d; ++j) {
      const double c = std::floor(p[j] / width);
      if (!std::isfinite(c) || std::abs(c) > 4e18) fail(ErrorKind::InvalidInput, "point coordinates out of range");
      key[j] = static_cast<std::int64_t>(c);
    }
    keys[i] = key;
    grid[key].push_back(static_cast<std::uint32_t>(i));
  }
  std::vector<CellKey> offsets;
  {
    int total = 1;
    for (int j = 0; j < d; ++j) total *= 3;
    for (int m = 0; m < total; ++m) {
      CellKey o{};
      int x = m;
      for (int j = 0; j < d; ++j) {
        o[j] = x % 3 - 1;
        x /= 3;
      }
      offsets.push_back(o);
    }
  }

  std::vector<double> partial(n, 0.0);
  std::vector<std::uint64_t> examined(n, 0);
  std::atomic<std::uint64_t> total_tuples{0};

  parallel_for(n, opt.threads, [&](std::size_t i) {
    const double* pi = cloud.point(i);
    std::vector<std::uint32_t> cand;
    for (const CellKey& o : offsets) {
      CellKey key = keys[i];
      for (int j = 0; j < d; ++j) key[j] += o[j];
      const auto it = grid.find(key);
      if (it == grid.end()) continue;
      for (std::uint32_t j : it->second)
        if (j > i && dist2(pi, cloud.point(j), d) <= reach2) cand.push_back(j);
    }
    std::sort(cand.begin(), cand.end());
    if (cand.size() < static_cast<std::size_t>(k)) return;
    std::vector<const double*> pts(static_cast<std::size_t>(k + 1));
    pts[0] = pi;
    double sum = 0.0;
    std::uint64_t count = 0;
    std::vector<std::size_t> pos(static_cast<std::size_t>(k));
    // Depth-first choice of k candidates in increasing index order with all
    // pairwise distances within reach.
    std::function<void(int, std::size_t)> extend = [&](int depth, std::size_t start) {
      if (depth == k) {
        ++count;
        sum += kernel.eval(pts.data(), d, r);
        return;
      }
      for (std::size_t p = start; p + static_cast<std::size_t>(k - depth) <= cand.size(); ++p) {
        const double* x = cloud.point(cand[p]);
        bool close = true;
        for (int j = 1; j <= depth; ++j)
          if (dist2(x, pts[j], d) > reach2) {
            close = false;
            break;
          }
        if (!close) continue;
        pts[depth + 1] = x;
        extend(depth + 1, p + 1);
      }
    };
    extend(0, 0);
    partial[i] = sum;
    examined[i] = count;
    if (total_tuples.fetch_add(count) + count > opt.budget)
      fail(ErrorKind::Budget, "tuple enumeration exceeded the configured budget");
  });
  out.value = pairwise_sum(partial);
  for (std::uint64_t c : examined) out.tuples += c;
  return out;
}

StatisticValue compute_S_bruteforce(const PointCloud& cloud, const Kernel& kernel, double r) {
  const std::size_t n = cloud.size();
  if (n > 64) fail(ErrorKind::InvalidInput, "brute-force oracle refuses clouds larger than 64 points");
  StatisticValue out;
  out.r = r;
  const int k = kernel.order();
  if (n < static_cast<std::size_t>(k + 1)) return out;
  std::vector<int> idx(static_cast<std::size_t>(k + 1));
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<const double*> pts(idx.size());
  double sum = 0.0;
  for (;;) {
    for (std::size_t j = 0; j < idx.size(); ++j) pts[j] = cloud.point(static_cast<std::size_t>(idx[j]));
    sum += kernel.eval(pts.data(), cloud.dim, r);
    ++out.tuples;
    int j = k;
    while (j >= 0 && idx[j] == static_cast<int>(n) - (k + 1) + j) --j;
    if (j < 0) break;
    ++idx[j];
    for (int m = j + 1; m <= k; ++m) idx[m] = idx[m - 1] + 1;
  }
  out.value = sum;
  return out;
}

double weighted_combination(const std::vector<PointCloud>& clouds, const Kernel& kernel, double r,
                            const std::vector<double>& weights, const ComputeOptions& opt) {
  if (clouds.size() != weights.size() || clouds.empty())
    fail(ErrorKind::InvalidInput, "one weight per cloud is required");
  for (const auto& c : clouds)
    if (c.meta.parent != clouds[0].meta.parent)
      fail(ErrorKind::Consistency, "clouds do not derive from the same parent sample");
  double s = 0.0;
  for (std::size_t i = 0; i < clouds.size(); ++i)
    if (weights[i] != 0.0) s += weights[i] * compute_S(clouds[i], kernel, r, opt).value;
  return s;
}

}  // namespace hsu
