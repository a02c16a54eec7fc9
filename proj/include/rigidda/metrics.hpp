// Evaluation metrics (3D Dice, symmetric surface Hausdorff, volumes,
// Bland-Altman rows) and label post-processing.
#pragma once

#include "rigidda/volume.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace rigidda {

// Hard-set Dice of one class. Empty when both masks are empty.
std::optional<double> dice3d(const LabelVolume& pred, const LabelVolume& truth, int class_id);

// Boundary voxels: mask voxels with at least one 6-neighbour outside the mask
// or outside the grid.
Mask surface_voxels(const Mask& m);

// Symmetric Hausdorff distance (mm) between the surface voxel sets of one
// class, using the grid spacing. Empty (excluded) when either mask is empty.
std::optional<double> hausdorff(const LabelVolume& pred, const LabelVolume& truth, int class_id);
std::optional<double> hausdorff(const Mask& pred, const Mask& truth);

// Squared Euclidean distance (mm^2) from every voxel to the nearest nonzero
// voxel of `m`; +inf everywhere when `m` is empty.
Eigen::ArrayXd squared_distance_transform(const Mask& m);

// Largest 26-connected component (ties go to the component met first in
// memory order). Empty masks pass through.
Mask largest_cc_3d(const Mask& m);

// Per-z-slice binary closing with a k x k square, computed as on the unbounded
// plane with zero outside the slice, so the result always contains the input.
Mask closing_2d(const Mask& m, int k = 5);

// Per class: largest component, then closing. Voxels added by the closing
// only claim background, classes in id order.
LabelVolume postprocess(const LabelVolume& labels, int k = 5);

struct ClassMetrics {
  std::optional<double> dice;
  std::optional<double> hausdorff_mm;
  double volume_pred_ml = 0.0;
  double volume_truth_ml = 0.0;
  double volume_diff_ml = 0.0;  // pred - truth
};

struct MetricReport {
  std::string case_id;
  std::array<ClassMetrics, kNumForeground> classes;  // LV, MYO, RV

  const ClassMetrics& at(int class_id) const { return classes.at(class_id - 1); }
};

MetricReport evaluate_labels(const LabelVolume& pred, const LabelVolume& truth,
                             std::string case_id = {});

const char* class_name(int class_id);

struct BlandAltmanPoint {
  std::string case_id;
  int class_id = 0;
  double mean_ml = 0.0;
  double diff_ml = 0.0;
};

struct BlandAltmanSummary {
  int class_id = 0;
  double bias = 0.0;
  double sd = 0.0;  // sample standard deviation of the differences
  double lower = 0.0;
  double upper = 0.0;
};

struct BlandAltman {
  std::vector<BlandAltmanPoint> points;
  std::vector<BlandAltmanSummary> summary;
};

// Throws std::invalid_argument with fewer than two reports.
BlandAltman bland_altman(const std::vector<MetricReport>& reports);
std::string bland_altman_csv(const BlandAltman& ba);

}  // namespace rigidda
