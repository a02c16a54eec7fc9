// Brute-force reference implementations the library is checked against.
// Written for clarity over speed; none of them shares code with src/.
#pragma once

#include "support/fixtures.hpp"

#include <optional>
#include <utility>

namespace oracles {

using namespace rigidda;

inline constexpr double kClip = 1e-7;

double bce(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g, int j);
double ce(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g);
double dice(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g, int j, double smooth);
double sdl(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g, double smooth);
double focus_exact(const Eigen::ArrayXXd& q, double r);

// Random softmax rows and one-hot truth; some classes are dropped entirely
// from both so the empty-Dice guard is exercised.
std::pair<Eigen::ArrayXXd, Eigen::ArrayXXd> random_tensors(fixtures::Rng& rng);

std::optional<double> hard_dice(const LabelVolume& pred, const LabelVolume& truth, int c);
// Exhaustive pairwise distances between surface voxels (6-neighbour rule).
std::optional<double> hausdorff(const Mask& a, const Mask& b);
// Union-find labelling with 26-connectivity; keeps the largest component
// (ties to the one containing the lowest voxel index).
Mask largest_cc(const Mask& m);
// Per-slice dilation then erosion by a k x k square anchored like the
// library's, on the unbounded plane: a voxel survives the erosion iff every
// element position, inside the slice or not, is hit by the dilation.
Mask closing(const Mask& m, int k);
double sample_sd(const std::vector<double>& x);

}  // namespace oracles
