#include "rigidda/apply.hpp"

#include "rigidda/resampler.hpp"

namespace rigidda {

ApplyResult apply_task(const Volume& ax, const RigidParams& params, const TaskModule& task,
                       bool post) {
  if (!params.all_finite()) throw std::invalid_argument("apply: non-finite parameters");
  const AffineSet m = euler_to_affine(params);
  ApplyResult out;
  out.task_image = transform_volume(ax, m.task, task.grid()).image;
  out.task_labels = argmax_labels(task.evaluate(out.task_image));
  out.labels = transform_labels(out.task_labels, m.task_inverse, ax.geometry());
  if (post) out.labels = postprocess(out.labels);
  return out;
}

}  // namespace rigidda
