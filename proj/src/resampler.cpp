#include "rigidda/resampler.hpp"

#include "rigidda/reduce.hpp"
#include "trilinear.hpp"

#include <vector>

namespace rigidda {

namespace {

Eigen::Vector3d half_extent(const GridGeometry& g) {
  return 0.5 * (g.shape.cast<double>() - 1.0).matrix();
}

void require_samplable(const GridGeometry& g, const char* role) {
  g.validate();
  if ((g.shape < 2).any())
    throw std::invalid_argument(std::string(role) + " grid needs at least 2 voxels per axis");
}

// Clamp into the grid after the slack test.
Eigen::Vector3d clamp_to_grid(Eigen::Vector3d c, const Shape& shape) {
  for (int k = 0; k < 3; ++k) c[k] = std::clamp(c[k], 0.0, double(shape[k] - 1));
  return c;
}

bool in_bounds_with_slack(const Eigen::Vector3d& c, const Shape& shape) {
  for (int k = 0; k < 3; ++k)
    if (!(c[k] >= -kBoundsSlack && c[k] <= shape[k] - 1 + kBoundsSlack)) return false;
  return true;
}

template <typename F>
void for_each_target_voxel(const Eigen::Matrix<double, 3, 4>& a, const GridGeometry& target, F&& f) {
  std::int64_t i = 0;
  for (int z = 0; z < target.shape[2]; ++z)
    for (int y = 0; y < target.shape[1]; ++y) {
      const Eigen::Vector3d row = a.col(1) * y + a.col(2) * z + a.col(3);
      for (int x = 0; x < target.shape[0]; ++x, ++i) f(i, Eigen::Vector3d(a.col(0) * x + row));
    }
}

}  // namespace

Eigen::Matrix<double, 3, 4> voxel_map(const Affine& m, const GridGeometry& source,
                                      const GridGeometry& target) {
  require_samplable(source, "source");
  require_samplable(target, "target");
  const Eigen::Vector3d s_src = half_extent(source);
  const Eigen::Vector3d s_tgt = half_extent(target);
  Eigen::Matrix<double, 3, 4> a;
  for (int r = 0; r < 3; ++r) {
    double row_sum = 0.0;
    for (int c = 0; c < 3; ++c) {
      a(r, c) = (s_src[r] / s_tgt[c]) * m(r, c);
      row_sum += m(r, c);
    }
    a(r, 3) = s_src[r] * (m(r, 3) + 1.0 - row_sum);
  }
  return a;
}

SampleResult transform_volume(const Volume& src, const Affine& m, const GridGeometry& target) {
  const auto a = voxel_map(m, src.geometry(), target);
  SampleResult out{Volume(target, 0.0), Mask(target, 0)};
  const Shape& shape = src.shape();
  for_each_target_voxel(a, target, [&](std::int64_t i, const Eigen::Vector3d& c) {
    if (!in_bounds_with_slack(c, shape)) return;
    out.image[i] = detail::interpolate(src.data(), detail::corners(clamp_to_grid(c, shape), shape));
    out.validity[i] = 1;
  });
  return out;
}

LabelVolume transform_labels(const LabelVolume& src, const Affine& m, const GridGeometry& target,
                             double scale) {
  require_known_labels(src);
  if (!(scale > 0.0)) throw std::invalid_argument("transform_labels: scale must be positive");
  const auto a = voxel_map(m, src.geometry(), target);
  LabelVolume out(target, std::uint8_t(0));
  const Shape& shape = src.shape();
  for_each_target_voxel(a, target, [&](std::int64_t i, const Eigen::Vector3d& c) {
    if (!in_bounds_with_slack(c, shape)) return;
    const detail::Corner8 k = detail::corners(clamp_to_grid(c, shape), shape);
    std::array<double, kNumClasses> acc{};
    for (int n = 0; n < 8; ++n) acc[src[k.idx[n]]] += k.w[n] * scale;
    int best = 0;
    for (int cls = 1; cls < kNumClasses; ++cls)
      if (acc[cls] > acc[best]) best = cls;
    out[i] = std::uint8_t(best);
  });
  return out;
}

SampleWithGradient transform_volume_with_gradient(const Volume& src, const Affine& m,
                                                  const GridGeometry& target) {
  const auto a = voxel_map(m, src.geometry(), target);
  SampleWithGradient out{{Volume(target, 0.0), Mask(target, 0)},
                         Eigen::Array3Xd::Zero(3, target.voxel_count()),
                         half_extent(src.geometry())};
  const Shape& shape = src.shape();
  for_each_target_voxel(a, target, [&](std::int64_t i, const Eigen::Vector3d& c) {
    if (!in_bounds_with_slack(c, shape)) return;
    Eigen::Vector3d g;
    out.sample.image[i] =
        detail::interpolate_with_gradient(src.data(), clamp_to_grid(c, shape), shape, g);
    out.sample.validity[i] = 1;
    out.spatial_grad.col(i) = g;
  });
  return out;
}

MatrixGradient backprop_matrix(const SampleWithGradient& s, const Eigen::ArrayXd& upstream) {
  const GridGeometry& target = s.sample.image.geometry();
  if (upstream.size() != target.voxel_count())
    throw std::invalid_argument("backprop_matrix: upstream size does not match target grid");
  const Eigen::Vector3d s_tgt = half_extent(target);
  const int w = target.shape[0];
  const std::int64_t rows = std::int64_t(target.shape[1]) * target.shape[2];
  std::vector<MatrixGradient> partial(std::size_t(rows), MatrixGradient::Zero());

  // Within a row, u_x = x / s_x - 1 while u_y, u_z are constant, so only the
  // sums of g and g*x are needed.
  for (std::int64_t row = 0; row < rows; ++row) {
    const int y = int(row % target.shape[1]);
    const int z = int(row / target.shape[1]);
    Eigen::Vector3d sum_g = Eigen::Vector3d::Zero();
    Eigen::Vector3d sum_gx = Eigen::Vector3d::Zero();
    const std::int64_t base = row * w;
    for (int x = 0; x < w; ++x) {
      const double up = upstream[base + x];
      if (up == 0.0) continue;
      const Eigen::Vector3d g =
          up * s.spatial_grad.col(base + x).matrix().cwiseProduct(s.source_half_extent);
      sum_g += g;
      sum_gx += g * double(x);
    }
    MatrixGradient& p = partial[std::size_t(row)];
    p.col(0) = sum_gx / s_tgt[0] - sum_g;
    p.col(1) = sum_g * (y / s_tgt[1] - 1.0);
    p.col(2) = sum_g * (z / s_tgt[2] - 1.0);
    p.col(3) = sum_g;
  }
  return pairwise_sum(std::span<const MatrixGradient>(partial), MatrixGradient::Zero().eval());
}

ParamVector sample_gradient(const Volume& src, const Affine& m,
                            const std::array<Affine, kNumParams>& jac, const GridGeometry& target,
                            const Eigen::ArrayXd& upstream) {
  return chain_matrix_gradient(
      backprop_matrix(transform_volume_with_gradient(src, m, target), upstream), jac);
}

Eigen::Matrix<double, Eigen::Dynamic, kNumParams> sample_jacobian(
    const Volume& src, const Affine& m, const std::array<Affine, kNumParams>& jac,
    const GridGeometry& target) {
  const SampleWithGradient s = transform_volume_with_gradient(src, m, target);
  const Eigen::Array3Xd u = normalized_lattice(target);
  Eigen::Matrix<double, Eigen::Dynamic, kNumParams> out(target.voxel_count(), kNumParams);
  for (std::int64_t i = 0; i < target.voxel_count(); ++i) {
    const Eigen::Vector3d g = s.spatial_grad.col(i).matrix().cwiseProduct(s.source_half_extent);
    const Eigen::Vector4d uh(u(0, i), u(1, i), u(2, i), 1.0);
    for (int k = 0; k < kNumParams; ++k) out(i, k) = g.dot(jac[k].topRows<3>() * uh);
  }
  return out;
}

Eigen::Array3Xd normalized_lattice(const GridGeometry& g) {
  const Affine n = g.normalized_from_voxel();
  Eigen::Array3Xd u(3, g.voxel_count());
  std::int64_t i = 0;
  for (int z = 0; z < g.shape[2]; ++z)
    for (int y = 0; y < g.shape[1]; ++y)
      for (int x = 0; x < g.shape[0]; ++x, ++i)
        u.col(i) = (n * Eigen::Vector4d(x, y, z, 1.0)).head<3>().array();
  return u;
}

}  // namespace rigidda
