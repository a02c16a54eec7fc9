#include "rigidda/optim.hpp"

#include "rigidda/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rigidda {

void adam_step(ParamVector& p, const ParamVector& grad, AdamState& state, double lr,
               const AdamConfig& cfg) {
  if (!grad.allFinite()) throw NumericalError("adam_step: non-finite gradient");
  state.t += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.t));
  const ParamVector m_hat = state.m / bc1;
  const ParamVector v_hat = state.v / bc2;
  p.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + cfg.eps);
}

std::string OptimConfig::check() const {
  if (!(lr0 > 0.0)) return "lr0 must be positive";
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) return "plateau_factor must lie in (0, 1)";
  if (!(lr_min > 0.0 && lr_min <= lr0)) return "lr_min must lie in (0, lr0]";
  if (plateau_patience < 1) return "plateau_patience must be at least 1";
  if (stop_patience < 1) return "stop_patience must be at least 1";
  if (epoch_steps < 1) return "epoch_steps must be at least 1";
  if (max_steps < 1) return "max_steps must be at least 1";
  if (!(min_delta >= 0.0)) return "min_delta must be non-negative";
  return {};
}

void OptimConfig::validate() const {
  if (auto msg = check(); !msg.empty()) throw std::invalid_argument("optim config: " + msg);
}

PlateauScheduler::PlateauScheduler(const OptimConfig& cfg)
    : lr_(cfg.lr0),
      factor_(cfg.plateau_factor),
      lr_min_(cfg.lr_min),
      min_delta_(cfg.min_delta),
      patience_(cfg.plateau_patience),
      stop_patience_(cfg.stop_patience),
      best_(std::numeric_limits<double>::infinity()) {
  cfg.validate();
}

PlateauScheduler::Event PlateauScheduler::observe(double loss) {
  Event ev;
  if (loss < best_ - min_delta_) {
    best_ = loss;
    wait_ = 0;
    since_best_ = 0;
    ev.improved = true;
    return ev;
  }
  ++wait_;
  ++since_best_;
  if (since_best_ >= stop_patience_) {
    ev.stop = true;
    return ev;
  }
  if (wait_ >= patience_) {
    const double next = std::max(lr_ * factor_, lr_min_);
    ev.decayed = next < lr_;
    lr_ = next;
    wait_ = 0;
  }
  return ev;
}

}  // namespace rigidda
