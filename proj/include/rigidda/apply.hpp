// Inference path: transform the axial stack into the task domain, segment,
// and bring the labels back to the axial grid.
#pragma once

#include "rigidda/metrics.hpp"
#include "rigidda/rigid_transform.hpp"
#include "rigidda/task.hpp"

namespace rigidda {

struct ApplyResult {
  Volume task_image;      // T(ax, M_t) on the task grid
  LabelVolume task_labels;  // argmax on the task grid
  LabelVolume labels;     // back on the axial grid
};

// I_t = T(ax, M_t); Q = task(I_t); argmax; labels resampled by M_t^-1 onto
// the axial grid; optional post-processing.
ApplyResult apply_task(const Volume& ax, const RigidParams& params, const TaskModule& task,
                       bool post = true);

}  // namespace rigidda
