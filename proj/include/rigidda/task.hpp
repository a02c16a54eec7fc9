// Pluggable task module: a fixed, differentiable provider of per-voxel class
// probabilities for an image presented on the task grid.
#pragma once

#include "rigidda/volume.hpp"

namespace rigidda {

class TaskModule {
 public:
  virtual ~TaskModule() = default;

  // Grid the module expects its input on.
  virtual const GridGeometry& grid() const = 0;

  virtual ProbabilityVolume evaluate(const Volume& image) const = 0;

  // Vector-Jacobian product: given dL/dq (N x kNumClasses) return dL/d(image).
  virtual Eigen::ArrayXd backward(const Volume& image, const Eigen::ArrayXXd& upstream) const = 0;

  // Same, reusing q = evaluate(image).
  virtual Eigen::ArrayXd backward(const Volume& image, const ProbabilityVolume& q,
                                  const Eigen::ArrayXXd& upstream) const {
    (void)q;
    return backward(image, upstream);
  }
};

}  // namespace rigidda
