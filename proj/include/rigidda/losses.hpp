// Loss library: segmentation losses (BCE, CE, soft Dice, SDL, combined),
// masked MSE, the in-plane weight, cycle loss, focus loss and the combined
// registration objective with analytic parameter gradients.
#pragma once

#include "rigidda/resampler.hpp"
#include "rigidda/rigid_transform.hpp"
#include "rigidda/task.hpp"
#include "rigidda/volume.hpp"

#include <optional>
#include <string>

namespace rigidda {

inline constexpr double kProbabilityClip = 1e-7;

struct LossWeights {
  double alpha1 = 1.0;
  double alpha2 = 0.1;
  double w_seg = 0.5;
  double r = 0.9;       // focus threshold
  double tau = 0.02;    // sigmoid surrogate temperature
  double smooth = 1.0;  // soft Dice smoothing

  // alpha2 = 0 disables the focus term; otherwise alpha1 > alpha2 > 0.
  std::string check() const;
  void validate() const;
};

// Segmentation losses. Q and G are N x kNumClasses (column 0 background);
// class-averaged terms run over the kNumForeground foreground columns.
double bce(const Eigen::Ref<const Eigen::ArrayXd>& q, const Eigen::Ref<const Eigen::ArrayXd>& g,
           double eps = kProbabilityClip);
double ce(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g, double eps = kProbabilityClip);
double soft_dice(const Eigen::Ref<const Eigen::ArrayXd>& q,
                 const Eigen::Ref<const Eigen::ArrayXd>& g, double smooth = 1.0);
double sdl(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g, double smooth = 1.0);
double seg_loss(const Eigen::ArrayXXd& q, const Eigen::ArrayXXd& g, double w_seg = 0.5,
                double smooth = 1.0);

// (1 - |u_x|) * (1 - |u_y|) over normalized in-plane coordinates, constant in z.
Volume in_plane_weight(const GridGeometry& g);

// 1/2 * mean((a - b) * V_b * W)^2 over all target voxels.
double masked_mse(const SampleResult& a, const SampleResult& b, const Volume* weight = nullptr);

enum class FocusMode { Exact, Smooth };

// 1 - (sum over foreground classes and voxels of 1[q > r]) / (C N); Smooth
// replaces the indicator with sigmoid((q - r) / tau).
double focus_loss(const ProbabilityVolume& q, double r, FocusMode mode, double tau = 0.02);
// Smooth focus loss, optionally with its gradient d/dq.
double focus_smooth(const ProbabilityVolume& q, double r, double tau, Eigen::ArrayXXd* grad);
// d(smooth focus)/dq, N x kNumClasses (background column zero).
Eigen::ArrayXXd focus_loss_gradient(const ProbabilityVolume& q, double r, double tau);
// Number of foreground entries above r.
std::int64_t focus_count(const ProbabilityVolume& q, double r);

// Ground-truth relative transform and its inverse (normalized coordinates).
struct GroundTruth {
  Affine forward = Affine::Identity();
  Affine inverse = Affine::Identity();

  static GroundTruth from_forward(const Affine& m);
  static GroundTruth from_params(const RigidParams& p);
};

// Which terms enter the objective.
struct LossMode {
  bool cycle = true;     // add the backward (SAX -> AX) term
  bool in_plane = true;  // apply W
  bool focus = true;     // task-branch focus loss

  static LossMode baseline() { return {false, false, false}; }
  static LossMode cycle_only() { return {true, true, false}; }
  static LossMode cycle_focus() { return {true, false, true}; }
  static LossMode full() { return {true, true, true}; }
  // Accepts baseline | cycle | cycle+focus | full.
  static LossMode parse(const std::string& name);
  std::string name() const;
};

struct LossReport {
  double cycle_fwd = 0.0;
  double cycle_bwd = 0.0;
  double cycle = 0.0;
  double focus_exact = 0.0;
  double focus_smooth = 0.0;
  double total = 0.0;  // alpha1 * cycle + alpha2 * focus_smooth
  double alpha1 = 1.0;
  double alpha2 = 0.0;
  std::string reduction = "mean";
  std::string mode;
  std::optional<double> seg_ce;
  std::optional<double> seg_sdl;
  std::optional<double> seg_total;
};

// Precomputed ground-truth side of one AX/SAX pair. I (ax) and J (sax) are on
// their own grids; the forward term compares on J's grid, the backward term on
// I's grid, the task branch samples I onto the task module's grid.
class PairObjective {
 public:
  PairObjective(const Volume& ax, const Volume& sax, const GroundTruth& gt, LossMode mode,
                const LossWeights& weights, const TaskModule* task = nullptr);

  // Loss terms and, when grad != nullptr, d(total)/d(params).
  LossReport evaluate(const RigidParams& p, ParamVector* grad = nullptr) const;

  const LossMode& mode() const { return mode_; }
  const LossWeights& weights() const { return weights_; }

 private:
  const Volume& ax_;
  const Volume& sax_;
  GroundTruth gt_;
  LossMode mode_;
  LossWeights weights_;
  const TaskModule* task_;
  SampleResult gt_fwd_;
  SampleResult gt_bwd_;
  Eigen::ArrayXd mask_fwd_;  // (V * W)^2 on J's grid
  Eigen::ArrayXd mask_bwd_;  // (V * W)^2 on I's grid
};

// Convenience entry points built on PairObjective.
double cycle_loss(const Volume& ax, const Volume& sax, const RigidParams& p, const GroundTruth& gt,
                  bool in_plane = true);
LossReport total_loss(const Volume& ax, const Volume& sax, const RigidParams& p,
                      const GroundTruth& gt, const TaskModule& task, const LossWeights& weights,
                      LossMode mode = LossMode::full());

}  // namespace rigidda
