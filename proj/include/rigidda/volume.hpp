// Volume types and grid geometry.
//
// Voxel layout is x fastest (width), then y (height), then z (slices).
// Shapes are always written (W, H, D).

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rigidda {

using Shape = Eigen::Array3i;
using Affine = Eigen::Matrix4d;

// Class ids of the label maps.
enum class Tissue : std::uint8_t { Background = 0, LV = 1, MYO = 2, RV = 3 };
inline constexpr int kNumClasses = 4;
inline constexpr int kNumForeground = 3;

struct GridGeometry {
  Shape shape{1, 1, 1};
  Eigen::Vector3d spacing{1.0, 1.0, 1.0};
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Matrix3d direction = Eigen::Matrix3d::Identity();

  GridGeometry() = default;
  GridGeometry(Shape shape_, Eigen::Vector3d spacing_,
               Eigen::Vector3d origin_ = Eigen::Vector3d::Zero(),
               Eigen::Matrix3d direction_ = Eigen::Matrix3d::Identity())
      : shape(std::move(shape_)), spacing(std::move(spacing_)),
        origin(std::move(origin_)), direction(std::move(direction_)) {}

  std::int64_t voxel_count() const {
    return std::int64_t(shape[0]) * shape[1] * shape[2];
  }
  std::int64_t index(int x, int y, int z) const {
    return x + std::int64_t(shape[0]) * (y + std::int64_t(shape[1]) * z);
  }

  // Empty string when valid, else the violated invariant.
  std::string check() const;
  bool is_valid() const { return check().empty(); }
  // Throws std::invalid_argument when invalid.
  void validate() const;

  // world = origin + direction * (spacing .* voxel)
  Affine world_from_voxel() const;
  Affine voxel_from_world() const;
  // Align-corners normalization: voxel 0 -> -1, voxel n-1 -> +1.
  // Axes with a single voxel map to 0.
  Affine normalized_from_voxel() const;
  Affine voxel_from_normalized() const;
  Affine normalized_from_world() const {
    return normalized_from_voxel() * voxel_from_world();
  }
  Affine world_from_normalized() const {
    return world_from_voxel() * voxel_from_normalized();
  }

  Eigen::Vector3d voxel_to_world(const Eigen::Vector3d& v) const {
    return origin + direction * spacing.cwiseProduct(v);
  }
  Eigen::Vector3d world_to_voxel(const Eigen::Vector3d& p) const {
    return (direction.transpose() * (p - origin)).cwiseQuotient(spacing);
  }
  Eigen::Vector3d center_world() const {
    return voxel_to_world(0.5 * (shape.cast<double>() - 1.0).matrix());
  }

  bool same_grid(const GridGeometry& other, double tol = 1e-9) const;
};

Eigen::Vector3d world_to_normalized(const GridGeometry& g, const Eigen::Vector3d& p);
Eigen::Vector3d normalized_to_world(const GridGeometry& g, const Eigen::Vector3d& u);

inline bool in_normalized_bounds(const Eigen::Vector3d& u) {
  return (u.array().abs() <= 1.0).all();
}

// Dense scalar volume over a grid. Immutable by convention once built; the
// mutable accessors exist for construction.
template <typename Scalar_>
class BasicVolume {
 public:
  using Scalar = Scalar_;
  using Buffer = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  BasicVolume() = default;
  explicit BasicVolume(GridGeometry geometry, Scalar fill = Scalar(0))
      : geometry_(std::move(geometry)),
        data_(Buffer::Constant(geometry_.voxel_count(), fill)) {}
  BasicVolume(GridGeometry geometry, Buffer data)
      : geometry_(std::move(geometry)), data_(std::move(data)) {
    if (data_.size() != geometry_.voxel_count())
      throw std::invalid_argument("volume buffer length does not match grid shape");
  }

  const GridGeometry& geometry() const { return geometry_; }
  const Shape& shape() const { return geometry_.shape; }
  int width() const { return geometry_.shape[0]; }
  int height() const { return geometry_.shape[1]; }
  int depth() const { return geometry_.shape[2]; }
  std::int64_t size() const { return data_.size(); }

  const Buffer& data() const { return data_; }
  Buffer& data() { return data_; }

  Scalar operator()(int x, int y, int z) const { return data_[geometry_.index(x, y, z)]; }
  Scalar& operator()(int x, int y, int z) { return data_[geometry_.index(x, y, z)]; }
  Scalar operator[](std::int64_t i) const { return data_[i]; }
  Scalar& operator[](std::int64_t i) { return data_[i]; }

  template <typename Other>
  BasicVolume<Other> cast() const {
    return BasicVolume<Other>(geometry_, data_.template cast<Other>());
  }

 private:
  GridGeometry geometry_;
  Buffer data_;
};

using Volume = BasicVolume<double>;
using LabelVolume = BasicVolume<std::uint8_t>;
using Mask = BasicVolume<std::uint8_t>;

// Per-voxel class probabilities, N x kNumClasses with column 0 = background.
struct ProbabilityVolume {
  GridGeometry geometry;
  Eigen::ArrayXXd q;

  // Empty string when q is within [0,1] and rows sum to 1 within 1e-6.
  std::string check() const;
};

// Hard labels by per-voxel argmax (ties to the lower id).
LabelVolume argmax_labels(const ProbabilityVolume& p);

// One-hot encoding, N x kNumClasses.
Eigen::ArrayXXd one_hot(const LabelVolume& labels);

// Throws std::invalid_argument on a non-finite intensity.
void require_finite(const Volume& v, const char* what);
// Throws std::invalid_argument on a class id outside {0..3}.
void require_known_labels(const LabelVolume& v);

// Binary mask of a single class.
Mask class_mask(const LabelVolume& labels, int class_id);

}  // namespace rigidda
