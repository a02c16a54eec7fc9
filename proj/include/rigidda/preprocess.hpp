// Preprocessing onto the common registration grid: isotropic resampling,
// centered crop/pad, intensity clipping and normalization.
#pragma once

#include "rigidda/volume.hpp"

#include <algorithm>
#include <cmath>

namespace rigidda {

// Trilinear resample of `v` at the voxel centers of `target` (world space).
// Samples outside the source grid are set to `fill`.
Volume resample_to_grid(const Volume& v, const GridGeometry& target, double fill = 0.0);

// Label resample on `target`: one-hot channels scaled by `scale`, trilinear
// interpolation, per-voxel argmax. Outside the source grid is background.
LabelVolume resample_labels_to_grid(const LabelVolume& labels, const GridGeometry& target,
                                    double scale = 100.0);

// Grid with spacing (iso, iso, iso) covering the physical extent of `g`
// (to within one voxel), same origin and direction.
GridGeometry isotropic_grid(const GridGeometry& g, double iso);

// Throws std::invalid_argument for iso <= 0 or an axis with fewer than 2 voxels.
Volume resample_isotropic(const Volume& v, double iso);
LabelVolume resample_labels_isotropic(const LabelVolume& labels, double iso);

// Grid of shape `target` centred on `g`: axes larger than the target are
// centre-cropped, smaller ones zero-padded (floor half on the low side).
// World positions of retained voxels are unchanged.
GridGeometry centered_grid(const GridGeometry& g, const Shape& target);

// Voxel offset of the centred grid: new voxel j sits on old voxel j + shift.
inline Shape grid_shift(const Shape& from, const Shape& to) {
  Shape s;
  for (int k = 0; k < 3; ++k) {
    const int d = from[k] - to[k];
    s[k] = d >= 0 ? d / 2 : -((-d) / 2);
  }
  return s;
}

template <typename Scalar>
BasicVolume<Scalar> pad_to_grid(const BasicVolume<Scalar>& v, const Shape& target) {
  if ((target < 1).any()) throw std::invalid_argument("pad_to_grid: target shape must be positive");
  const GridGeometry out_geom = centered_grid(v.geometry(), target);
  // new voxel j corresponds to old voxel j + shift
  const Shape shift = grid_shift(v.shape(), target);
  BasicVolume<Scalar> out(out_geom, Scalar(0));
  for (int z = 0; z < target[2]; ++z) {
    const int sz = z + shift[2];
    if (sz < 0 || sz >= v.depth()) continue;
    for (int y = 0; y < target[1]; ++y) {
      const int sy = y + shift[1];
      if (sy < 0 || sy >= v.height()) continue;
      for (int x = 0; x < target[0]; ++x) {
        const int sx = x + shift[0];
        if (sx < 0 || sx >= v.width()) continue;
        out(x, y, z) = v(sx, sy, sz);
      }
    }
  }
  return out;
}

// Nearest-rank quantile: the ceil(q*N)-th smallest value.
double nearest_rank_quantile(const Eigen::Ref<const Eigen::ArrayXd>& values, double q);

// Clip at the q-quantile, then min/max normalize to [0, 1]. A volume whose
// clipped range is empty maps to all zeros.
Volume clip_and_normalize(const Volume& v, double q = 0.999);

// Shift the origin by `shift_mm` along the grid z axis and grow the z extent
// by 2*|shift_mm| (rounded to whole slices).
GridGeometry extend_z(const GridGeometry& g, double shift_mm);

}  // namespace rigidda
