#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace oracles {

double bce(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g, int j) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const double qi = std::min(std::max(q(i, j), kClip), 1.0 - kClip);
    s += g(i, j) * std::log(qi) + (1.0 - g(i, j)) * std::log(1.0 - qi);
  }
  return -s / double(q.rows());
}

double ce(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g) {
  return (bce(q, g, 1) + bce(q, g, 2) + bce(q, g, 3)) / 3.0;
}

double dice(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g, int j, double smooth) {
  double inter = 0.0, sq = 0.0, sg = 0.0;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    inter += q(i, j) * g(i, j);
    sq += q(i, j);
    sg += g(i, j);
  }
  return (2.0 * inter + smooth) / (sg + sq + smooth);
}

double sdl(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g, double smooth) {
  double s = 0.0;
  for (int j = 1; j <= 3; ++j) s += dice(q, g, j, smooth);
  return 1.0 - s / 3.0;
}

double focus_exact(const Eigen::ArrayXXd& q, double r) {
  long count = 0;
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    for (int j = 1; j <= 3; ++j)
      if (q(i, j) > r) ++count;
  return 1.0 - double(count) / (3.0 * double(q.rows()));
}

std::pair<Eigen::ArrayXXd, Eigen::ArrayXXd> random_tensors(fixtures::Rng& rng) {
  const int n = rng.integer(1, 60);
  Eigen::ArrayXXd q(n, kNumClasses), g = Eigen::ArrayXXd::Zero(n, kNumClasses);
  bool dropped[kNumClasses] = {false, rng.uniform() < 0.2, rng.uniform() < 0.2, rng.uniform() < 0.2};
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      q(i, c) = dropped[c] ? 0.0 : std::exp(rng.uniform(-4, 4));
      sum += q(i, c);
    }
    q.row(i) /= sum;
    int c;
    do c = rng.integer(0, 3);
    while (dropped[c]);
    g(i, c) = 1.0;
  }
  return {q, g};
}

std::optional<double> hard_dice(const LabelVolume& pred, const LabelVolume& truth, int c) {
  long a = 0, b = 0, both = 0;
  for (int z = 0; z < pred.depth(); ++z)
    for (int y = 0; y < pred.height(); ++y)
      for (int x = 0; x < pred.width(); ++x) {
        const bool p = pred(x, y, z) == c, t = truth(x, y, z) == c;
        a += p;
        b += t;
        both += p && t;
      }
  if (a + b == 0) return std::nullopt;
  return 2.0 * double(both) / double(a + b);
}

namespace {

bool at(const Mask& m, int x, int y, int z) {
  if (x < 0 || y < 0 || z < 0 || x >= m.width() || y >= m.height() || z >= m.depth()) return false;
  return m(x, y, z) != 0;
}

std::vector<Eigen::Vector3d> surface_points(const Mask& m) {
  std::vector<Eigen::Vector3d> pts;
  const Eigen::Vector3d& s = m.geometry().spacing;
  const int d6[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int z = 0; z < m.depth(); ++z)
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) {
        if (!at(m, x, y, z)) continue;
        bool boundary = false;
        for (const auto& d : d6) boundary = boundary || !at(m, x + d[0], y + d[1], z + d[2]);
        if (boundary) pts.emplace_back(x * s[0], y * s[1], z * s[2]);
      }
  return pts;
}

double directed(const std::vector<Eigen::Vector3d>& from, const std::vector<Eigen::Vector3d>& to) {
  double worst = 0.0;
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) best = std::min(best, (p - q).norm());
    worst = std::max(worst, best);
  }
  return worst;
}

struct UnionFind {
  std::vector<std::int64_t> parent;
  explicit UnionFind(std::int64_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::int64_t find(std::int64_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(std::int64_t a, std::int64_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

}  // namespace

std::optional<double> hausdorff(const Mask& a, const Mask& b) {
  const auto pa = surface_points(a), pb = surface_points(b);
  if (pa.empty() || pb.empty()) return std::nullopt;
  return std::max(directed(pa, pb), directed(pb, pa));
}

Mask largest_cc(const Mask& m) {
  const GridGeometry& g = m.geometry();
  UnionFind uf(g.voxel_count());
  for (int z = 0; z < m.depth(); ++z)
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) {
        if (!at(m, x, y, z)) continue;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
              if (at(m, x + dx, y + dy, z + dz)) uf.unite(g.index(x, y, z), g.index(x + dx, y + dy, z + dz));
      }
  std::vector<std::int64_t> size(g.voxel_count(), 0);
  for (std::int64_t i = 0; i < m.size(); ++i)
    if (m[i]) ++size[uf.find(i)];
  std::int64_t best = -1;
  for (std::int64_t i = 0; i < m.size(); ++i)
    if (m[i] && (best < 0 || size[uf.find(i)] > size[best])) best = uf.find(i);
  Mask out(g, std::uint8_t(0));
  for (std::int64_t i = 0; i < m.size(); ++i) out[i] = m[i] && uf.find(i) == best;
  return out;
}

Mask closing(const Mask& m, int k) {
  // Element offsets [-lo, hi]; dilation reflects the element.
  const int lo = (k - 1) / 2, hi = k / 2;
  auto dilated = [&](int x, int y, int z) {
    for (int dy = -lo; dy <= hi; ++dy)
      for (int dx = -lo; dx <= hi; ++dx)
        if (at(m, x - dx, y - dy, z)) return true;
    return false;
  };
  Mask out(m.geometry(), std::uint8_t(0));
  for (int z = 0; z < m.depth(); ++z)
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) {
        bool all = true;
        for (int dy = -lo; dy <= hi && all; ++dy)
          for (int dx = -lo; dx <= hi && all; ++dx) all = dilated(x + dx, y + dy, z);
        out(x, y, z) = all;
      }
  return out;
}

double sample_sd(const std::vector<double>& x) {
  const double n = double(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (n - 1.0));
}

}  // namespace oracles
