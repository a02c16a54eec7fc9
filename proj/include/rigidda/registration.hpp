// Per-pair optimization of the nine rigid parameters: the direct stand-in for
// a localisation network regressing them.
#pragma once

#include "rigidda/losses.hpp"
#include "rigidda/optim.hpp"

#include <vector>

namespace rigidda {

struct TraceRow {
  int step = 0;
  double lr = 0.0;
  LossReport loss;
  RigidParams params;
};

struct RegistrationTrace {
  std::vector<TraceRow> rows;
  bool early_stopped = false;
  int decays = 0;
};

struct RegistrationResult {
  RigidParams params;
  RegistrationTrace trace;
};

// Both branches share (phi, theta, psi); t follows the cycle terms and t_t the
// focus term. Modes without focus keep t_t equal to t. Throws NumericalError
// on a non-finite loss or gradient.
RegistrationResult register_pair(const Volume& ax, const Volume& sax, const GroundTruth& gt,
                                 const TaskModule* task, const LossWeights& weights,
                                 const OptimConfig& cfg, LossMode mode = LossMode::full());

// Six-parameter baseline on the forward masked MSE alone; `target` is the grid
// the ground-truth transform resamples I onto. A task module, when given, only
// adds the focus terms to the trace.
RegistrationResult baseline_register(const Volume& ax, const GridGeometry& target,
                                     const GroundTruth& gt, const OptimConfig& cfg,
                                     const TaskModule* reporter = nullptr);

// Shared loop over any objective.
RegistrationResult run_registration(const PairObjective& objective, const OptimConfig& cfg);

}  // namespace rigidda
