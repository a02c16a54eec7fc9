// Adam and a reduce-on-plateau / early-stopping schedule.
#pragma once

#include "rigidda/rigid_transform.hpp"

#include <cstdint>
#include <string>

namespace rigidda {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ParamVector m = ParamVector::Zero();
  ParamVector v = ParamVector::Zero();
  std::int64_t t = 0;
};

// One bias-corrected Adam update of p in place. Throws NumericalError on a
// non-finite gradient.
void adam_step(ParamVector& p, const ParamVector& grad, AdamState& state, double lr,
               const AdamConfig& cfg = {});

struct OptimConfig {
  double lr0 = 1e-3;
  double plateau_factor = 0.3;
  int plateau_patience = 5;  // epochs without gain before a decay
  double lr_min = 1e-8;
  int stop_patience = 10;    // epochs without gain before stopping
  int epoch_steps = 25;      // optimization steps per scheduler epoch
  int max_steps = 2000;
  double min_delta = 1e-6;   // smallest improvement counted as a gain
  std::uint64_t seed = 0;

  std::string check() const;
  void validate() const;
};

// Fed one loss per epoch. Early stopping is checked before the plateau decay,
// so an epoch that stops never also decays.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(const OptimConfig& cfg);

  struct Event {
    bool improved = false;
    bool decayed = false;
    bool stop = false;
  };

  Event observe(double loss);

  double lr() const { return lr_; }
  double best() const { return best_; }
  int epochs_since_best() const { return since_best_; }

 private:
  double lr_;
  double factor_;
  double lr_min_;
  double min_delta_;
  int patience_;
  int stop_patience_;
  double best_;
  int wait_ = 0;
  int since_best_ = 0;
};

}  // namespace rigidda
