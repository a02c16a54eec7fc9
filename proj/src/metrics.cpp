#include "rigidda/metrics.hpp"

#include "rigidda/format.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace rigidda {

namespace {

void require_same_shape(const GridGeometry& a, const GridGeometry& b) {
  if (!(a.shape == b.shape).all())
    throw std::invalid_argument("prediction and truth must share a grid shape");
}

// Exact 1-D lower envelope (squared distances): out[q] = min_p f[p] + ((q-p) s)^2.
// Candidates next to the selected parabola are re-checked so near-ties in the
// intersection arithmetic cannot change the minimum.
void envelope_1d(const std::vector<double>& f, double s, std::vector<double>& out,
                 std::vector<int>& v, std::vector<double>& z) {
  const int n = int(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto cost = [&](int q, int p) {
    const double d = double(q - p) * s;
    return f[p] + d * d;
  };
  int first = -1;
  for (int p = 0; p < n; ++p)
    if (std::isfinite(f[p])) {
      first = p;
      break;
    }
  out.assign(n, inf);
  if (first < 0) return;
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  int k = 0;
  v[0] = first;
  z[0] = -inf;
  z[1] = inf;
  const double s2 = s * s;
  for (int p = first + 1; p < n; ++p) {
    if (!std::isfinite(f[p])) continue;
    double x;
    while (true) {
      const int r = v[k];
      x = ((f[p] + s2 * p * p) - (f[r] + s2 * r * r)) / (2.0 * s2 * (p - r));
      if (x <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (x <= z[k]) {  // k == 0 and p dominates everywhere
      v[0] = p;
      z[1] = inf;
      continue;
    }
    ++k;
    v[k] = p;
    z[k] = x;
    z[k + 1] = inf;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    double best = cost(q, v[j]);
    if (j > 0) best = std::min(best, cost(q, v[j - 1]));
    if (j < k) best = std::min(best, cost(q, v[j + 1]));
    out[q] = best;
  }
}

}  // namespace

std::optional<double> dice3d(const LabelVolume& pred, const LabelVolume& truth, int class_id) {
  require_same_shape(pred.geometry(), truth.geometry());
  const auto c = std::uint8_t(class_id);
  std::int64_t np = 0, nt = 0, both = 0;
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == c, t = truth[i] == c;
    np += p;
    nt += t;
    both += p && t;
  }
  if (np + nt == 0) return std::nullopt;
  return 2.0 * double(both) / double(np + nt);
}

Mask surface_voxels(const Mask& m) {
  const Shape& s = m.shape();
  Mask out(m.geometry(), std::uint8_t(0));
  for (int z = 0; z < s[2]; ++z)
    for (int y = 0; y < s[1]; ++y)
      for (int x = 0; x < s[0]; ++x) {
        if (!m(x, y, z)) continue;
        const bool edge = x == 0 || y == 0 || z == 0 || x == s[0] - 1 || y == s[1] - 1 ||
                          z == s[2] - 1;
        if (edge || !m(x - 1, y, z) || !m(x + 1, y, z) || !m(x, y - 1, z) ||
            !m(x, y + 1, z) || !m(x, y, z - 1) || !m(x, y, z + 1))
          out(x, y, z) = 1;
      }
  return out;
}

Eigen::ArrayXd squared_distance_transform(const Mask& m) {
  const GridGeometry& g = m.geometry();
  const Shape& s = g.shape;
  constexpr double inf = std::numeric_limits<double>::infinity();
  Eigen::ArrayXd d(g.voxel_count());

  // x: nearest set voxel along the row, by two sweeps.
  for (int z = 0; z < s[2]; ++z)
    for (int y = 0; y < s[1]; ++y) {
      const std::int64_t row = g.index(0, y, z);
      std::vector<int> dist(s[0], std::numeric_limits<int>::max());
      int last = -1;
      for (int x = 0; x < s[0]; ++x) {
        if (m[row + x]) last = x;
        if (last >= 0) dist[x] = x - last;
      }
      last = -1;
      for (int x = s[0] - 1; x >= 0; --x) {
        if (m[row + x]) last = x;
        if (last >= 0) dist[x] = std::min(dist[x], last - x);
      }
      for (int x = 0; x < s[0]; ++x) {
        if (dist[x] == std::numeric_limits<int>::max()) {
          d[row + x] = inf;
        } else {
          const double t = double(dist[x]) * g.spacing[0];
          d[row + x] = t * t;
        }
      }
    }

  std::vector<double> f, out, z;
  std::vector<int> v;
  for (int zz = 0; zz < s[2]; ++zz)
    for (int x = 0; x < s[0]; ++x) {
      f.resize(s[1]);
      for (int y = 0; y < s[1]; ++y) f[y] = d[g.index(x, y, zz)];
      envelope_1d(f, g.spacing[1], out, v, z);
      for (int y = 0; y < s[1]; ++y) d[g.index(x, y, zz)] = out[y];
    }
  for (int y = 0; y < s[1]; ++y)
    for (int x = 0; x < s[0]; ++x) {
      f.resize(s[2]);
      for (int zz = 0; zz < s[2]; ++zz) f[zz] = d[g.index(x, y, zz)];
      envelope_1d(f, g.spacing[2], out, v, z);
      for (int zz = 0; zz < s[2]; ++zz) d[g.index(x, y, zz)] = out[zz];
    }
  return d;
}

namespace {

double directed_sq(const Mask& from_surface, const Eigen::ArrayXd& to_dt) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < from_surface.size(); ++i)
    if (from_surface[i]) worst = std::max(worst, to_dt[i]);
  return worst;
}

}  // namespace

std::optional<double> hausdorff(const Mask& pred, const Mask& truth) {
  require_same_shape(pred.geometry(), truth.geometry());
  if ((pred.data() == 0).all() || (truth.data() == 0).all()) return std::nullopt;
  const Mask sp = surface_voxels(pred);
  const Mask st = surface_voxels(truth);
  const double a = directed_sq(sp, squared_distance_transform(st));
  const double b = directed_sq(st, squared_distance_transform(sp));
  return std::sqrt(std::max(a, b));
}

std::optional<double> hausdorff(const LabelVolume& pred, const LabelVolume& truth,
                                int class_id) {
  return hausdorff(class_mask(pred, class_id), class_mask(truth, class_id));
}

Mask largest_cc_3d(const Mask& m) {
  const GridGeometry& g = m.geometry();
  const Shape& s = g.shape;
  std::vector<std::int32_t> comp(m.size(), -1);
  std::vector<std::int64_t> sizes;
  std::vector<std::int64_t> stack;
  for (std::int64_t seed = 0; seed < m.size(); ++seed) {
    if (!m[seed] || comp[seed] >= 0) continue;
    const auto id = std::int32_t(sizes.size());
    std::int64_t count = 0;
    comp[seed] = id;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::int64_t i = stack.back();
      stack.pop_back();
      ++count;
      const int x = int(i % s[0]);
      const int y = int((i / s[0]) % s[1]);
      const int z = int(i / (std::int64_t(s[0]) * s[1]));
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy, nz = z + dz;
            if (nx < 0 || ny < 0 || nz < 0 || nx >= s[0] || ny >= s[1] || nz >= s[2]) continue;
            const std::int64_t j = g.index(nx, ny, nz);
            if (m[j] && comp[j] < 0) {
              comp[j] = id;
              stack.push_back(j);
            }
          }
    }
    sizes.push_back(count);
  }
  Mask out(g, std::uint8_t(0));
  if (sizes.empty()) return out;
  const auto keep = std::int32_t(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::int64_t i = 0; i < m.size(); ++i) out[i] = comp[i] == keep;
  return out;
}

namespace {

// Separable square max (dilate) or min (erode) filter over offsets [from, to]
// on one slice. `outside` is the value assumed beyond the slice border.
void square_filter(std::vector<std::uint8_t>& img, int w, int h, int from, int to, bool dilate,
                   std::uint8_t outside) {
  std::vector<std::uint8_t> tmp(img.size());
  auto pick = [&](std::uint8_t a, std::uint8_t b) {
    return dilate ? std::max(a, b) : std::min(a, b);
  };
  const std::uint8_t init = dilate ? 0 : 1;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t acc = init;
      for (int d = from; d <= to; ++d) {
        const int xx = x + d;
        acc = pick(acc, (xx < 0 || xx >= w) ? outside : img[std::size_t(y) * w + xx]);
      }
      tmp[std::size_t(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      std::uint8_t acc = init;
      for (int d = from; d <= to; ++d) {
        const int yy = y + d;
        acc = pick(acc, (yy < 0 || yy >= h) ? outside : tmp[std::size_t(yy) * w + x]);
      }
      img[std::size_t(y) * w + x] = acc;
    }
}

}  // namespace

Mask closing_2d(const Mask& m, int k) {
  if (k < 1) throw std::invalid_argument("closing kernel size must be >= 1");
  const Shape& s = m.shape();
  Mask out(m.geometry(), std::uint8_t(0));
  const int lo = (k - 1) / 2, hi = k / 2;  // element offsets [-lo, hi]
  // Work on a zero-padded slice wide enough that the dilation never reaches
  // the padded border, i.e. closing on the unbounded plane, then crop.
  const int pad = k;
  const int w = s[0] + 2 * pad, h = s[1] + 2 * pad;
  std::vector<std::uint8_t> img(std::size_t(w) * h);
  for (int z = 0; z < s[2]; ++z) {
    std::fill(img.begin(), img.end(), std::uint8_t(0));
    bool any = false;
    for (int y = 0; y < s[1]; ++y)
      for (int x = 0; x < s[0]; ++x) {
        const std::uint8_t v = m(x, y, z) ? 1 : 0;
        img[std::size_t(y + pad) * w + x + pad] = v;
        any = any || v;
      }
    if (!any) continue;
    square_filter(img, w, h, -hi, lo, true, 0);
    square_filter(img, w, h, -lo, hi, false, 0);
    for (int y = 0; y < s[1]; ++y)
      for (int x = 0; x < s[0]; ++x) out(x, y, z) = img[std::size_t(y + pad) * w + x + pad];
  }
  return out;
}

LabelVolume postprocess(const LabelVolume& labels, int k) {
  require_known_labels(labels);
  LabelVolume out(labels.geometry(), std::uint8_t(0));
  std::array<Mask, kNumForeground> closed;
  for (int c = 1; c <= kNumForeground; ++c) {
    const Mask cc = largest_cc_3d(class_mask(labels, c));
    for (std::int64_t i = 0; i < cc.size(); ++i)
      if (cc[i]) out[i] = std::uint8_t(c);
    closed[c - 1] = closing_2d(cc, k);
  }
  const LabelVolume kept = out;
  for (int c = 1; c <= kNumForeground; ++c)
    for (std::int64_t i = 0; i < out.size(); ++i)
      if (closed[c - 1][i] && kept[i] == 0 && out[i] == 0) out[i] = std::uint8_t(c);
  return out;
}

const char* class_name(int class_id) {
  switch (class_id) {
    case 0: return "BG";
    case 1: return "LV";
    case 2: return "MYO";
    case 3: return "RV";
  }
  return "?";
}

MetricReport evaluate_labels(const LabelVolume& pred, const LabelVolume& truth,
                             std::string case_id) {
  require_same_shape(pred.geometry(), truth.geometry());
  require_known_labels(pred);
  require_known_labels(truth);
  MetricReport r;
  r.case_id = std::move(case_id);
  const Eigen::Vector3d& sp = truth.geometry().spacing;
  const double voxel_ml = sp.prod() / 1000.0;
  for (int c = 1; c <= kNumForeground; ++c) {
    ClassMetrics& m = r.classes[c - 1];
    m.dice = dice3d(pred, truth, c);
    m.hausdorff_mm = hausdorff(pred, truth, c);
    const auto cid = std::uint8_t(c);
    m.volume_pred_ml = double((pred.data() == cid).count()) * voxel_ml;
    m.volume_truth_ml = double((truth.data() == cid).count()) * voxel_ml;
    m.volume_diff_ml = m.volume_pred_ml - m.volume_truth_ml;
  }
  return r;
}

BlandAltman bland_altman(const std::vector<MetricReport>& reports) {
  if (reports.size() < 2)
    throw std::invalid_argument("Bland-Altman data needs at least two reports");
  BlandAltman ba;
  const double n = double(reports.size());
  for (int c = 1; c <= kNumForeground; ++c) {
    double sum = 0.0;
    for (const auto& r : reports) {
      const ClassMetrics& m = r.at(c);
      BlandAltmanPoint p;
      p.case_id = r.case_id;
      p.class_id = c;
      p.mean_ml = 0.5 * (m.volume_pred_ml + m.volume_truth_ml);
      p.diff_ml = m.volume_diff_ml;
      sum += p.diff_ml;
      ba.points.push_back(p);
    }
    BlandAltmanSummary s;
    s.class_id = c;
    s.bias = sum / n;
    double ss = 0.0;
    for (const auto& r : reports) {
      const double e = r.at(c).volume_diff_ml - s.bias;
      ss += e * e;
    }
    s.sd = std::sqrt(ss / (n - 1.0));
    s.lower = s.bias - 1.96 * s.sd;
    s.upper = s.bias + 1.96 * s.sd;
    ba.summary.push_back(s);
  }
  return ba;
}

std::string bland_altman_csv(const BlandAltman& ba) {
  std::ostringstream os;
  os << "kind,case,class,mean_ml,diff_ml,bias_ml,sd_ml,lower_ml,upper_ml\n";
  for (const auto& p : ba.points)
    os << "point," << p.case_id << ',' << class_name(p.class_id) << ',' << fmt(p.mean_ml) << ','
       << fmt(p.diff_ml) << ",,,,\n";
  for (const auto& s : ba.summary)
    os << "summary,," << class_name(s.class_id) << ",,," << fmt(s.bias) << ',' << fmt(s.sd)
       << ',' << fmt(s.lower) << ',' << fmt(s.upper) << '\n';
  return os.str();
}

}  // namespace rigidda
