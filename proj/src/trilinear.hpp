// Internal trilinear interpolation kernel shared by the preprocessing
// resamplers and the differentiable sampler.
#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>

namespace rigidda::detail {

// Interpolation cell along one axis. Uses the cell to the left of a lattice
// point (weight 1 on the lattice voxel), so integer coordinates reproduce the
// voxel value exactly. Coordinates in the last half voxel clamp to the edge.
struct AxisCell {
  int i0;
  int i1;
  double frac;
};

inline AxisCell axis_cell(double c, int n) {
  if (n == 1) return {0, 0, 0.0};
  int i0 = static_cast<int>(std::ceil(c)) - 1;
  if (i0 < 0) i0 = 0;
  if (i0 > n - 2) i0 = n - 2;
  return {i0, i0 + 1, c - i0};
}

struct Corner8 {
  std::int64_t idx[8];
  double w[8];
};

// c is a voxel coordinate assumed within [0, n-1] on every axis.
inline Corner8 corners(const Eigen::Vector3d& c, const Eigen::Array3i& shape) {
  const AxisCell ax = axis_cell(c[0], shape[0]);
  const AxisCell ay = axis_cell(c[1], shape[1]);
  const AxisCell az = axis_cell(c[2], shape[2]);
  const std::int64_t sx = 1, sy = shape[0], sz = std::int64_t(shape[0]) * shape[1];
  Corner8 k;
  const int xs[2] = {ax.i0, ax.i1};
  const int ys[2] = {ay.i0, ay.i1};
  const int zs[2] = {az.i0, az.i1};
  const double wx[2] = {1.0 - ax.frac, ax.frac};
  const double wy[2] = {1.0 - ay.frac, ay.frac};
  const double wz[2] = {1.0 - az.frac, az.frac};
  int n = 0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx, ++n) {
        k.idx[n] = xs[dx] * sx + ys[dy] * sy + zs[dz] * sz;
        k.w[n] = wx[dx] * wy[dy] * wz[dz];
      }
  return k;
}

template <typename Buffer>
inline double interpolate(const Buffer& data, const Corner8& k) {
  double v = 0.0;
  for (int n = 0; n < 8; ++n) v += k.w[n] * double(data[k.idx[n]]);
  return v;
}

// Value and spatial gradient (per voxel-coordinate axis).
template <typename Buffer>
inline double interpolate_with_gradient(const Buffer& data, const Eigen::Vector3d& c,
                                        const Eigen::Array3i& shape, Eigen::Vector3d& grad) {
  const AxisCell ax = axis_cell(c[0], shape[0]);
  const AxisCell ay = axis_cell(c[1], shape[1]);
  const AxisCell az = axis_cell(c[2], shape[2]);
  const std::int64_t sy = shape[0], sz = std::int64_t(shape[0]) * shape[1];
  const std::int64_t b00 = ay.i0 * sy + az.i0 * sz;
  const std::int64_t b10 = ay.i1 * sy + az.i0 * sz;
  const std::int64_t b01 = ay.i0 * sy + az.i1 * sz;
  const std::int64_t b11 = ay.i1 * sy + az.i1 * sz;
  const double v000 = data[ax.i0 + b00], v100 = data[ax.i1 + b00];
  const double v010 = data[ax.i0 + b10], v110 = data[ax.i1 + b10];
  const double v001 = data[ax.i0 + b01], v101 = data[ax.i1 + b01];
  const double v011 = data[ax.i0 + b11], v111 = data[ax.i1 + b11];
  const double fx = ax.frac, fy = ay.frac, fz = az.frac;
  const double gx = 1.0 - fx, gy = 1.0 - fy, gz = 1.0 - fz;

  // Interpolate along x first.
  const double c00 = gx * v000 + fx * v100;
  const double c10 = gx * v010 + fx * v110;
  const double c01 = gx * v001 + fx * v101;
  const double c11 = gx * v011 + fx * v111;
  const double c0 = gy * c00 + fy * c10;
  const double c1 = gy * c01 + fy * c11;

  if (shape[0] > 1) {
    const double d00 = v100 - v000, d10 = v110 - v010, d01 = v101 - v001, d11 = v111 - v011;
    grad[0] = gz * (gy * d00 + fy * d10) + fz * (gy * d01 + fy * d11);
  } else {
    grad[0] = 0.0;
  }
  grad[1] = shape[1] > 1 ? gz * (c10 - c00) + fz * (c11 - c01) : 0.0;
  grad[2] = shape[2] > 1 ? c1 - c0 : 0.0;
  return gz * c0 + fz * c1;
}

inline bool in_voxel_bounds(const Eigen::Vector3d& c, const Eigen::Array3i& shape) {
  return c[0] >= 0.0 && c[1] >= 0.0 && c[2] >= 0.0 && c[0] <= shape[0] - 1 &&
         c[1] <= shape[1] - 1 && c[2] <= shape[2] - 1;
}

}  // namespace rigidda::detail
