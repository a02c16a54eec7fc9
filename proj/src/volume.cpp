#include "rigidda/volume.hpp"

#include <cmath>
#include <sstream>

namespace rigidda {

std::string GridGeometry::check() const {
  if ((shape < 1).any()) return "grid shape must be positive on every axis";
  if (!spacing.allFinite() || (spacing.array() <= 0.0).any())
    return "grid spacing must be positive and finite";
  if (!origin.allFinite()) return "grid origin must be finite";
  if (!direction.allFinite()) return "grid direction must be finite";
  const Eigen::Matrix3d gram = direction.transpose() * direction;
  if ((gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9)
    return "grid direction must be orthonormal";
  if (std::abs(std::abs(direction.determinant()) - 1.0) > 1e-9)
    return "grid direction must have |det| = 1";
  return {};
}

void GridGeometry::validate() const {
  if (auto msg = check(); !msg.empty()) throw std::invalid_argument(msg);
}

Affine GridGeometry::world_from_voxel() const {
  Affine a = Affine::Identity();
  a.topLeftCorner<3, 3>() = direction * spacing.asDiagonal();
  a.topRightCorner<3, 1>() = origin;
  return a;
}

Affine GridGeometry::voxel_from_world() const {
  Affine a = Affine::Identity();
  const Eigen::Matrix3d inv = spacing.cwiseInverse().asDiagonal() * direction.transpose();
  a.topLeftCorner<3, 3>() = inv;
  a.topRightCorner<3, 1>() = -inv * origin;
  return a;
}

Affine GridGeometry::normalized_from_voxel() const {
  Affine a = Affine::Identity();
  for (int k = 0; k < 3; ++k) {
    if (shape[k] > 1) {
      a(k, k) = 2.0 / (shape[k] - 1);
      a(k, 3) = -1.0;
    } else {
      a(k, k) = 0.0;
      a(k, 3) = 0.0;
    }
  }
  return a;
}

Affine GridGeometry::voxel_from_normalized() const {
  Affine a = Affine::Identity();
  for (int k = 0; k < 3; ++k) {
    if (shape[k] > 1) {
      const double half = 0.5 * (shape[k] - 1);
      a(k, k) = half;
      a(k, 3) = half;
    } else {
      a(k, k) = 0.0;
      a(k, 3) = 0.0;
    }
  }
  return a;
}

bool GridGeometry::same_grid(const GridGeometry& other, double tol) const {
  return (shape == other.shape).all() &&
         (spacing - other.spacing).cwiseAbs().maxCoeff() <= tol &&
         (origin - other.origin).cwiseAbs().maxCoeff() <= tol &&
         (direction - other.direction).cwiseAbs().maxCoeff() <= tol;
}

Eigen::Vector3d world_to_normalized(const GridGeometry& g, const Eigen::Vector3d& p) {
  return (g.normalized_from_world() * p.homogeneous()).head<3>();
}

Eigen::Vector3d normalized_to_world(const GridGeometry& g, const Eigen::Vector3d& u) {
  return (g.world_from_normalized() * u.homogeneous()).head<3>();
}

void require_finite(const Volume& v, const char* what) {
  if (!v.data().allFinite()) {
    std::ostringstream os;
    os << what << ": volume contains non-finite intensities";
    throw std::invalid_argument(os.str());
  }
}

void require_known_labels(const LabelVolume& v) {
  if (v.size() > 0 && v.data().maxCoeff() >= kNumClasses)
    throw std::invalid_argument("label volume contains an unknown class id");
}

Mask class_mask(const LabelVolume& labels, int class_id) {
  Mask m(labels.geometry());
  m.data() = (labels.data() == std::uint8_t(class_id)).template cast<std::uint8_t>();
  return m;
}

std::string ProbabilityVolume::check() const {
  if (q.rows() != geometry.voxel_count() || q.cols() != kNumClasses)
    return "probability volume has the wrong shape";
  if (!q.allFinite() || (q < 0.0).any() || (q > 1.0).any())
    return "probabilities must lie in [0, 1]";
  if (q.rows() > 0 && ((q.rowwise().sum() - 1.0).abs() > 1e-6).any())
    return "per-voxel probabilities must sum to 1";
  return {};
}

LabelVolume argmax_labels(const ProbabilityVolume& p) {
  LabelVolume out(p.geometry, std::uint8_t(0));
  for (Eigen::Index i = 0; i < p.q.rows(); ++i) {
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c)
      if (p.q(i, c) > p.q(i, best)) best = c;
    out[i] = std::uint8_t(best);
  }
  return out;
}

Eigen::ArrayXXd one_hot(const LabelVolume& labels) {
  require_known_labels(labels);
  Eigen::ArrayXXd g = Eigen::ArrayXXd::Zero(labels.size(), kNumClasses);
  for (std::int64_t i = 0; i < labels.size(); ++i) g(i, labels[i]) = 1.0;
  return g;
}

}  // namespace rigidda
