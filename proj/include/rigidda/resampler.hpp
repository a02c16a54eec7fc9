// Pull-based trilinear resampling under a normalized-space affine, with
// validity masks and gradients with respect to the transform.
#pragma once

#include "rigidda/rigid_transform.hpp"
#include "rigidda/volume.hpp"

namespace rigidda {

using MatrixGradient = Eigen::Matrix<double, 3, 4>;

struct SampleResult {
  Volume image;   // on the target grid, 0 where invalid
  Mask validity;  // 1 iff the source sample point is in bounds
};

// Slack (in source voxels) on the in-bounds test, absorbing rounding in the
// composed voxel map.
inline constexpr double kBoundsSlack = 1e-9;

// Affine taking target voxel indices to source voxel coordinates for a
// normalized-space matrix m. Requires at least 2 voxels per axis on both grids.
Eigen::Matrix<double, 3, 4> voxel_map(const Affine& m, const GridGeometry& source,
                                      const GridGeometry& target);

SampleResult transform_volume(const Volume& src, const Affine& m, const GridGeometry& target);

// One-hot channels scaled by `scale`, interpolated, then argmax. Ties go to
// the lower class id; invalid voxels are background.
LabelVolume transform_labels(const LabelVolume& src, const Affine& m, const GridGeometry& target,
                             double scale = 100.0);

struct SampleWithGradient {
  SampleResult sample;
  Eigen::Array3Xd spatial_grad;    // d(value)/d(source voxel coordinate), 0 if invalid
  Eigen::Vector3d source_half_extent;  // (n-1)/2 of the source grid
};

SampleWithGradient transform_volume_with_gradient(const Volume& src, const Affine& m,
                                                  const GridGeometry& target);

// dL/dM over the top three rows of m, given dL/d(output voxel).
MatrixGradient backprop_matrix(const SampleWithGradient& s, const Eigen::ArrayXd& upstream);

// Accumulated <dL/d(output), d(output)/dp> through a matrix Jacobian.
ParamVector sample_gradient(const Volume& src, const Affine& m,
                            const std::array<Affine, kNumParams>& jac, const GridGeometry& target,
                            const Eigen::ArrayXd& upstream);

// Per-voxel Jacobian d(output_i)/dp, N x 9. Meant for small grids.
Eigen::Matrix<double, Eigen::Dynamic, kNumParams> sample_jacobian(
    const Volume& src, const Affine& m, const std::array<Affine, kNumParams>& jac,
    const GridGeometry& target);

// Normalized coordinate of every target voxel, 3 x N.
Eigen::Array3Xd normalized_lattice(const GridGeometry& g);

}  // namespace rigidda
