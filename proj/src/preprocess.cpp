#include "rigidda/preprocess.hpp"

#include "trilinear.hpp"

#include <array>
#include <vector>

namespace rigidda {

namespace {

// Voxel-to-voxel affine from target voxels into source voxels.
Affine source_voxel_from_target_voxel(const GridGeometry& source, const GridGeometry& target) {
  return source.voxel_from_world() * target.world_from_voxel();
}

// Snap to the nearest integer when within rounding noise, so grids that share
// lattice points reproduce voxel values exactly.
double snap(double c) {
  const double r = std::round(c);
  return std::abs(c - r) < 1e-9 ? r : c;
}

template <typename F>
void for_each_source_coordinate(const GridGeometry& source, const GridGeometry& target, F&& f) {
  const Affine a = source_voxel_from_target_voxel(source, target);
  const Eigen::Matrix3d lin = a.topLeftCorner<3, 3>();
  const Eigen::Vector3d off = a.topRightCorner<3, 1>();
  std::int64_t i = 0;
  for (int z = 0; z < target.shape[2]; ++z)
    for (int y = 0; y < target.shape[1]; ++y)
      for (int x = 0; x < target.shape[0]; ++x, ++i) {
        Eigen::Vector3d c = lin.col(0) * x + lin.col(1) * y + lin.col(2) * z + off;
        for (int k = 0; k < 3; ++k) c[k] = snap(c[k]);
        f(i, c);
      }
}

void require_resamplable(const GridGeometry& g, double iso) {
  if (!(iso > 0.0) || !std::isfinite(iso))
    throw std::invalid_argument("resample_isotropic: iso spacing must be positive");
  if ((g.shape < 2).any())
    throw std::invalid_argument("resample_isotropic: every axis needs at least 2 voxels");
}

}  // namespace

Volume resample_to_grid(const Volume& v, const GridGeometry& target, double fill) {
  v.geometry().validate();
  target.validate();
  Volume out(target, fill);
  const Shape& shape = v.shape();
  for_each_source_coordinate(v.geometry(), target, [&](std::int64_t i, const Eigen::Vector3d& c) {
    if (detail::in_voxel_bounds(c, shape))
      out[i] = detail::interpolate(v.data(), detail::corners(c, shape));
  });
  return out;
}

LabelVolume resample_labels_to_grid(const LabelVolume& labels, const GridGeometry& target,
                                    double scale) {
  labels.geometry().validate();
  target.validate();
  require_known_labels(labels);
  LabelVolume out(target, std::uint8_t(0));
  const Shape& shape = labels.shape();
  for_each_source_coordinate(labels.geometry(), target, [&](std::int64_t i, const Eigen::Vector3d& c) {
    if (!detail::in_voxel_bounds(c, shape)) return;
    const detail::Corner8 k = detail::corners(c, shape);
    std::array<double, kNumClasses> acc{};
    for (int n = 0; n < 8; ++n) acc[labels[k.idx[n]]] += k.w[n] * scale;
    int best = 0;
    for (int cls = 1; cls < kNumClasses; ++cls)
      if (acc[cls] > acc[best]) best = cls;
    out[i] = std::uint8_t(best);
  });
  return out;
}

GridGeometry isotropic_grid(const GridGeometry& g, double iso) {
  require_resamplable(g, iso);
  GridGeometry out = g;
  for (int k = 0; k < 3; ++k) {
    const double extent = (g.shape[k] - 1) * g.spacing[k];
    out.shape[k] = int(std::floor(extent / iso + 1e-9)) + 1;
    out.spacing[k] = iso;
  }
  return out;
}

Volume resample_isotropic(const Volume& v, double iso) {
  return resample_to_grid(v, isotropic_grid(v.geometry(), iso));
}

LabelVolume resample_labels_isotropic(const LabelVolume& labels, double iso) {
  return resample_labels_to_grid(labels, isotropic_grid(labels.geometry(), iso));
}

GridGeometry centered_grid(const GridGeometry& g, const Shape& target) {
  const Shape shift = grid_shift(g.shape, target);
  GridGeometry out = g;
  out.shape = target;
  out.origin = g.voxel_to_world(shift.cast<double>().matrix());
  return out;
}

double nearest_rank_quantile(const Eigen::Ref<const Eigen::ArrayXd>& values, double q) {
  if (!(q > 0.0 && q <= 1.0)) throw std::invalid_argument("quantile must lie in (0, 1]");
  if (values.size() == 0) throw std::invalid_argument("quantile of an empty set");
  std::vector<double> sorted(values.data(), values.data() + values.size());
  const auto n = std::int64_t(sorted.size());
  std::int64_t rank = std::int64_t(std::ceil(q * double(n) - 1e-9));
  rank = std::clamp<std::int64_t>(rank, 1, n);
  std::nth_element(sorted.begin(), sorted.begin() + (rank - 1), sorted.end());
  return sorted[rank - 1];
}

Volume clip_and_normalize(const Volume& v, double q) {
  require_finite(v, "clip_and_normalize");
  Volume out(v.geometry(), 0.0);
  if (v.size() == 0) return out;
  const double hi = nearest_rank_quantile(v.data(), q);
  const double lo = v.data().minCoeff();
  if (!(hi > lo)) return out;
  out.data() = (v.data().min(hi) - lo) / (hi - lo);
  return out;
}

GridGeometry extend_z(const GridGeometry& g, double shift_mm) {
  GridGeometry out = g;
  out.origin = g.origin + shift_mm * g.direction.col(2);
  out.shape[2] = g.shape[2] + int(std::lround(2.0 * std::abs(shift_mm) / g.spacing[2]));
  return out;
}

}  // namespace rigidda
