// Shared test fixtures: grids, random volumes and masks, phantom pairs.
#pragma once

#include "rigidda/phantom.hpp"
#include "rigidda/rigid_transform.hpp"
#include "rigidda/volume.hpp"

#include <random>

namespace fixtures {

using namespace rigidda;

struct Rng {
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(gen);
  }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
  std::mt19937_64 gen;
};

GridGeometry cube_grid(int n, double spacing = 1.0);

// Random rotated, shifted grid.
GridGeometry oblique_grid(Shape shape, Eigen::Vector3d spacing, Rng& rng);

// Smooth random field: a few Gaussian blobs plus a linear trend.
Volume smooth_volume(const GridGeometry& g, Rng& rng);

// Phantom spec centred on `g` with its long axis along the grid z axis.
PhantomSpec centred_spec(const GridGeometry& g);

// Phantom image rendered on a cubic grid of n voxels whose extent fits the
// heart (spacing chosen from n).
struct PhantomVolume {
  PhantomSpec spec;
  Volume image;
  LabelVolume labels;
};
PhantomVolume phantom_volume(int n, double noise = 0.0, std::uint64_t seed = 0);

// Pair with a known normalized-space transform on a common n^3 grid.
PairGeometry cube_pair_geometry(int n);
// Pair whose preprocessed volumes are related by euler_to_affine(gt).forward;
// J shows the heart at its canonical pose on J's grid.
struct GtPair {
  PhantomSpec spec;
  PhantomPair pair;
  RigidParams gt;
};
GtPair gt_pair(int n, const RigidParams& gt, double noise = 0.0, std::uint64_t seed = 0,
               PhantomSpec base = {});

RigidParams random_params(Rng& rng, double max_angle_rad, double max_t, bool tie_task = true);

// Gradient-check error ||analytic - numeric|| / ||numeric||. Trilinear
// sampling is only piecewise smooth, so single small components of a finite
// difference carry kink noise of the order of the larger ones times h.
template <typename V>
double gradient_error(const V& analytic, const V& numeric) {
  const double scale = numeric.norm();
  return scale == 0.0 ? analytic.norm() : (analytic - numeric).norm() / scale;
}

// Central differences of f at x with step h.
template <typename F>
ParamVector central_difference(F&& f, const ParamVector& x, double h) {
  ParamVector g;
  for (int k = 0; k < kNumParams; ++k) {
    ParamVector a = x, b = x;
    a[k] += h;
    b[k] -= h;
    g[k] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

Mask random_mask(const GridGeometry& g, Rng& rng, double density);
LabelVolume random_labels(const GridGeometry& g, Rng& rng);

// Up to 16 voxels a side with anisotropic spacing.
GridGeometry random_small_grid(Rng& rng);
// A few boxes of random classes over background plus salt noise, so
// components and surfaces of every shape show up.
LabelVolume random_blob_labels(const GridGeometry& g, Rng& rng);

}  // namespace fixtures
