#include "rigidda/registration.hpp"

#include "rigidda/errors.hpp"

#include <cmath>
#include <sstream>

namespace rigidda {

RegistrationResult run_registration(const PairObjective& objective, const OptimConfig& cfg) {
  cfg.validate();
  const bool task_branch = objective.mode().focus;
  PlateauScheduler scheduler(cfg);
  AdamState adam;
  RegistrationResult out;
  ParamVector p = ParamVector::Zero();
  ParamVector grad;
  double epoch_sum = 0.0;

  for (int step = 0; step < cfg.max_steps; ++step) {
    RigidParams params = RigidParams::from_vector(p);
    const LossReport rep = objective.evaluate(params, &grad);
    if (!task_branch) params.t_task = params.t;
    out.trace.rows.push_back({step, scheduler.lr(), rep, params});
    if (!std::isfinite(rep.total) || !grad.allFinite()) {
      std::ostringstream os;
      os << "registration diverged at step " << step << " (loss " << rep.total << ")";
      throw NumericalError(os.str());
    }
    adam_step(p, grad, adam, scheduler.lr());
    if (!task_branch) p.segment<3>(kTxTask) = p.segment<3>(kTx);

    epoch_sum += rep.total;
    if ((step + 1) % cfg.epoch_steps == 0) {
      const auto ev = scheduler.observe(epoch_sum / cfg.epoch_steps);
      epoch_sum = 0.0;
      if (ev.decayed) ++out.trace.decays;
      if (ev.stop) {
        out.trace.early_stopped = true;
        break;
      }
    }
  }
  out.params = RigidParams::from_vector(p);
  return out;
}

RegistrationResult register_pair(const Volume& ax, const Volume& sax, const GroundTruth& gt,
                                 const TaskModule* task, const LossWeights& weights,
                                 const OptimConfig& cfg, LossMode mode) {
  const PairObjective objective(ax, sax, gt, mode, weights, task);
  return run_registration(objective, cfg);
}

RegistrationResult baseline_register(const Volume& ax, const GridGeometry& target,
                                     const GroundTruth& gt, const OptimConfig& cfg,
                                     const TaskModule* reporter) {
  const Volume placeholder(target, 0.0);
  LossWeights w;
  w.alpha2 = 0.0;
  const PairObjective objective(ax, placeholder, gt, LossMode::baseline(), w, reporter);
  return run_registration(objective, cfg);
}

}  // namespace rigidda
