// Analytic nested-ellipsoid cardiac phantoms and a pose-sensitive analytic
// segmenter implementing TaskModule.
//
// Phantom-local frame (mm): the LV long axis runs along +z from the apex
// (negative z) to a flat base plane at z = base_z. The myocardium is the shell
// between the LV ellipsoid and an outer ellipsoid; the RV is the part of its
// own ellipsoid outside the myocardium.
#pragma once

#include "rigidda/losses.hpp"
#include "rigidda/task.hpp"
#include "rigidda/volume.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rigidda {

struct Ellipsoid {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d semi_axes = Eigen::Vector3d::Ones();

  // Approximate signed distance (negative inside), exact on the surface.
  double signed_distance(const Eigen::Vector3d& p) const;
  bool contains(const Eigen::Vector3d& p) const;
  double volume() const;
};

struct TissueLevels {
  double background = 0.0;
  double lv = 1.0;
  double myo = 0.35;
  double rv = 0.75;

  double level(int class_id) const;
};

struct PhantomSpec {
  Ellipsoid lv{{0.0, 0.0, 0.0}, {14.0, 14.0, 28.0}};
  Ellipsoid myo{{0.0, 0.0, 0.0}, {21.0, 21.0, 35.0}};  // outer myocardial surface
  Ellipsoid rv{{-20.0, 6.0, 0.0}, {18.0, 26.0, 30.0}};
  double base_z = 14.0;  // structures exist for local z <= base_z
  TissueLevels levels;
  double sigma_mm = 2.0;  // edge width of the intensity sigmoid
  Affine pose = Affine::Identity();  // phantom-local mm -> world mm

  // Analytic segmenter knobs.
  double logit_scale = 20.0;      // logit gap between a full match and none
  double intensity_width = 0.05;  // width of the image/template agreement
  double prior_width_mm = 1.0;  // edge width of the prior memberships

  std::string check() const;
  void validate() const;

  // Local-frame bounding box of the heart (corners min, max).
  std::pair<Eigen::Vector3d, Eigen::Vector3d> local_bounds() const;
  // Pose centring the heart on `g` with the long axis along the grid z axis.
  Affine canonical_pose(const GridGeometry& g) const;

  // Hard class id at a phantom-local point.
  int label_at_local(const Eigen::Vector3d& p) const;
  // Smooth class memberships (sum to 1) at a phantom-local point.
  Eigen::Array4d memberships_at_local(const Eigen::Vector3d& p, double width) const;
};

struct PhantomImage {
  Volume image;
  LabelVolume labels;
  std::vector<std::string> warnings;
};

// Renders `spec` (at spec.pose) on `g`. Additive zero-mean Gaussian noise of
// standard deviation `noise_sigma` is drawn from `seed`.
PhantomImage generate_phantom(const PhantomSpec& spec, const GridGeometry& g,
                              double noise_sigma = 0.0, std::uint64_t seed = 0);

// Acquisition and preprocessing geometry of an AX/SAX pair.
struct PairGeometry {
  GridGeometry axial;      // acquisition grid of I
  GridGeometry short_axis;  // acquisition grid of J
  Shape common_shape{64, 64, 64};
  double iso_mm = 1.5;
  double quantile = 0.999;
  double sax_z_shift_mm = 0.0;  // signed z extension of J's grid, 0 = none

  // Final (preprocessed) grids.
  GridGeometry axial_common() const;
  GridGeometry short_axis_common() const;
};

struct PhantomPair {
  Volume ax;
  Volume sax;
  LabelVolume ax_labels;
  LabelVolume sax_labels;
  GroundTruth gt;  // maps J-normalized target points to I-normalized source points
  std::vector<std::string> warnings;
};

// I shows the phantom at spec.pose, J at spec.pose * rel (rel: world mm rigid).
PhantomPair make_pair(const PhantomSpec& spec, const Affine& rel, const PairGeometry& geom,
                      double noise_sigma = 0.0, std::uint64_t seed = 0);

// J shows the phantom at spec.pose; I is placed so that the preprocessed pair
// is related by the normalized-space matrix `gt_forward`.
PhantomPair make_pair_with_gt(const PhantomSpec& spec, const Affine& gt_forward,
                              const PairGeometry& geom, double noise_sigma = 0.0,
                              std::uint64_t seed = 0);

// Volume preprocessing used for both sides: isotropic resample, centre
// crop/pad to the common shape, quantile clip + min/max normalization.
Volume preprocess_volume(const Volume& v, const Shape& common, double iso, double quantile);
LabelVolume preprocess_labels(const LabelVolume& v, const Shape& common, double iso);

// Task module whose prior is the phantom at its canonical pose on `grid`:
//   logit_c = logit_scale * g(x) * (m_c(x) - 1/2),
//   g(x) = exp(-(I(x) - T(x))^2 / (2 w^2))
// with m_c the smooth canonical memberships, T the phantom rendered at its
// canonical pose and probabilities by softmax. The prior only speaks where the
// image agrees with the canonical template, so the module saturates only where
// the presented image lines up with the canonical pose.
// Per-voxel, hence slice-wise on the presented stack.
class AnalyticSegmenter final : public TaskModule {
 public:
  AnalyticSegmenter(const PhantomSpec& spec, GridGeometry grid);

  const GridGeometry& grid() const override { return grid_; }
  ProbabilityVolume evaluate(const Volume& image) const override;
  Eigen::ArrayXd backward(const Volume& image, const Eigen::ArrayXXd& upstream) const override;
  Eigen::ArrayXd backward(const Volume& image, const ProbabilityVolume& q,
                          const Eigen::ArrayXXd& upstream) const override;

  const Eigen::ArrayXXd& prior() const { return prior_; }

 private:
  void require_grid(const Volume& image) const;
  Eigen::ArrayXd agreement(const Volume& image) const;
  Eigen::ArrayXXd probabilities(const Volume& image) const;
  Eigen::ArrayXd vjp(const Volume& image, const Eigen::ArrayXXd& q,
                     const Eigen::ArrayXXd& upstream) const;

  GridGeometry grid_;
  double logit_scale_;
  double intensity_width_;
  Eigen::ArrayXXd prior_;  // N x kNumClasses canonical memberships
  Eigen::ArrayXXd centred_prior_;  // prior_ - 1/2
  Eigen::ArrayXd template_;  // canonical-pose phantom intensities
};

}  // namespace rigidda
