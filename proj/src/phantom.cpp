#include "rigidda/phantom.hpp"

#include "rigidda/preprocess.hpp"
#include "rigidda/resampler.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace rigidda {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

double Ellipsoid::signed_distance(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d d = p - center;
  const double k0 = d.cwiseQuotient(semi_axes).norm();
  const double k1 = d.cwiseQuotient(semi_axes.cwiseProduct(semi_axes)).norm();
  if (k1 == 0.0) return -semi_axes.minCoeff();
  return k0 * (k0 - 1.0) / k1;
}

bool Ellipsoid::contains(const Eigen::Vector3d& p) const {
  return (p - center).cwiseQuotient(semi_axes).squaredNorm() <= 1.0;
}

double Ellipsoid::volume() const {
  return 4.0 / 3.0 * std::numbers::pi * semi_axes.prod();
}

double TissueLevels::level(int class_id) const {
  switch (class_id) {
    case 1: return lv;
    case 2: return myo;
    case 3: return rv;
    default: return background;
  }
}

std::string PhantomSpec::check() const {
  for (const Ellipsoid* e : {&lv, &myo, &rv})
    if (!e->center.allFinite() || !(e->semi_axes.array() > 0.0).all())
      return "ellipsoid semi-axes must be positive";
  if (!(sigma_mm > 0.0)) return "sigma_mm must be positive";
  if (!(prior_width_mm > 0.0)) return "prior_width_mm must be positive";
  if (!(logit_scale > 0.0)) return "logit_scale must be positive";
  if (!(intensity_width > 0.0)) return "intensity_width must be positive";
  if (!std::isfinite(base_z)) return "base_z must be finite";
  if (!is_rigid(pose, 1e-6)) return "pose must be a rigid transform";
  // LV inside the outer myocardial surface: test a Fibonacci sphere of points.
  const int n = 2000;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(1.0 - z * z);
    const Eigen::Vector3d unit(r * std::cos(golden * i), r * std::sin(golden * i), z);
    const Eigen::Vector3d p = lv.center + lv.semi_axes.cwiseProduct(unit);
    if (!myo.contains(p)) return "LV must lie inside the outer myocardial surface";
  }
  return {};
}

void PhantomSpec::validate() const {
  if (auto msg = check(); !msg.empty()) throw std::invalid_argument("phantom spec: " + msg);
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> PhantomSpec::local_bounds() const {
  Eigen::Vector3d lo = (myo.center - myo.semi_axes).cwiseMin(rv.center - rv.semi_axes);
  Eigen::Vector3d hi = (myo.center + myo.semi_axes).cwiseMax(rv.center + rv.semi_axes);
  hi[2] = std::min(hi[2], base_z);
  return {lo, hi};
}

Affine PhantomSpec::canonical_pose(const GridGeometry& g) const {
  const auto [lo, hi] = local_bounds();
  const Eigen::Vector3d mid = 0.5 * (lo + hi);
  Affine p = Affine::Identity();
  p.topLeftCorner<3, 3>() = g.direction;
  p.topRightCorner<3, 1>() = g.center_world() - g.direction * mid;
  return p;
}

int PhantomSpec::label_at_local(const Eigen::Vector3d& p) const {
  if (p[2] > base_z) return 0;
  if (myo.contains(p)) return lv.contains(p) ? 1 : 2;
  if (rv.contains(p)) return 3;
  return 0;
}

Eigen::Array4d PhantomSpec::memberships_at_local(const Eigen::Vector3d& p, double width) const {
  const double base = sigmoid((base_z - p[2]) / width);
  const double heart = sigmoid(-myo.signed_distance(p) / width) * base;
  const double blood = sigmoid(-lv.signed_distance(p) / width);
  const double right = sigmoid(-rv.signed_distance(p) / width) * base;
  Eigen::Array4d m;
  m << (1.0 - heart) * (1.0 - right), heart * blood, heart * (1.0 - blood), (1.0 - heart) * right;
  return m;
}

PhantomImage generate_phantom(const PhantomSpec& spec, const GridGeometry& g, double noise_sigma,
                              std::uint64_t seed) {
  spec.validate();
  g.validate();
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be non-negative");
  PhantomImage out{Volume(g, 0.0), LabelVolume(g, 0), {}};
  const Affine local_from_world = spec.pose.inverse();
  const Affine local_from_voxel = local_from_world * g.world_from_voxel();
  const Eigen::Array4d levels(spec.levels.background, spec.levels.lv, spec.levels.myo,
                              spec.levels.rv);
  std::int64_t i = 0;
  for (int z = 0; z < g.shape[2]; ++z)
    for (int y = 0; y < g.shape[1]; ++y)
      for (int x = 0; x < g.shape[0]; ++x, ++i) {
        const Eigen::Vector3d p = (local_from_voxel * Eigen::Vector4d(x, y, z, 1.0)).head<3>();
        out.labels[i] = std::uint8_t(spec.label_at_local(p));
        out.image[i] = (spec.memberships_at_local(p, spec.sigma_mm) * levels).sum();
      }
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (std::int64_t k = 0; k < out.image.size(); ++k) out.image[k] += noise(rng);
  }

  // structures exceeding the grid
  const auto [lo, hi] = spec.local_bounds();
  const Affine voxel_from_local = g.voxel_from_world() * spec.pose;
  for (int c = 0; c < 8; ++c) {
    const Eigen::Vector3d corner((c & 1) ? hi[0] : lo[0], (c & 2) ? hi[1] : lo[1],
                                 (c & 4) ? hi[2] : lo[2]);
    const Eigen::Vector3d v = (voxel_from_local * corner.homogeneous()).head<3>();
    if ((v.array() < -0.5).any() || (v.array() > g.shape.cast<double>() - 0.5).any()) {
      out.warnings.push_back("phantom structures exceed the grid");
      break;
    }
  }
  return out;
}

GridGeometry PairGeometry::axial_common() const {
  return centered_grid(isotropic_grid(axial, iso_mm), common_shape);
}

GridGeometry PairGeometry::short_axis_common() const {
  GridGeometry g = isotropic_grid(short_axis, iso_mm);
  if (sax_z_shift_mm != 0.0) g = extend_z(g, sax_z_shift_mm);
  return centered_grid(g, common_shape);
}

Volume preprocess_volume(const Volume& v, const Shape& common, double iso, double quantile) {
  return clip_and_normalize(pad_to_grid(resample_isotropic(v, iso), common), quantile);
}

LabelVolume preprocess_labels(const LabelVolume& v, const Shape& common, double iso) {
  return pad_to_grid(resample_labels_isotropic(v, iso), common);
}

namespace {

PhantomPair render_pair(const PhantomSpec& spec, const Affine& pose_ax, const Affine& pose_sax,
                        const PairGeometry& geom, double noise_sigma, std::uint64_t seed) {
  PhantomSpec ax_spec = spec, sax_spec = spec;
  ax_spec.pose = pose_ax;
  sax_spec.pose = pose_sax;
  const std::uint64_t seed_ax = splitmix64(seed);
  const std::uint64_t seed_sax = splitmix64(seed_ax);
  PhantomImage ax = generate_phantom(ax_spec, geom.axial, noise_sigma, seed_ax);
  PhantomImage sax = generate_phantom(sax_spec, geom.short_axis, noise_sigma, seed_sax);

  PhantomPair pair;
  pair.ax = preprocess_volume(ax.image, geom.common_shape, geom.iso_mm, geom.quantile);
  pair.ax_labels = preprocess_labels(ax.labels, geom.common_shape, geom.iso_mm);

  GridGeometry sax_iso = isotropic_grid(geom.short_axis, geom.iso_mm);
  if (geom.sax_z_shift_mm != 0.0) sax_iso = extend_z(sax_iso, geom.sax_z_shift_mm);
  pair.sax = clip_and_normalize(
      pad_to_grid(resample_to_grid(sax.image, sax_iso), geom.common_shape), geom.quantile);
  pair.sax_labels =
      pad_to_grid(resample_labels_to_grid(sax.labels, sax_iso), geom.common_shape);

  const GridGeometry& gi = pair.ax.geometry();
  const GridGeometry& gj = pair.sax.geometry();
  const Affine m = gi.normalized_from_world() * pose_ax * pose_sax.inverse() * gj.world_from_normalized();
  pair.gt = GroundTruth::from_forward(m);
  for (auto* w : {&ax.warnings, &sax.warnings})
    pair.warnings.insert(pair.warnings.end(), w->begin(), w->end());
  return pair;
}

}  // namespace

PhantomPair make_pair(const PhantomSpec& spec, const Affine& rel, const PairGeometry& geom,
                      double noise_sigma, std::uint64_t seed) {
  if (!is_rigid(rel, 1e-6)) throw std::invalid_argument("make_pair: rel must be rigid");
  return render_pair(spec, spec.pose, spec.pose * rel, geom, noise_sigma, seed);
}

PhantomPair make_pair_with_gt(const PhantomSpec& spec, const Affine& gt_forward,
                              const PairGeometry& geom, double noise_sigma, std::uint64_t seed) {
  const GridGeometry gi = geom.axial_common();
  const GridGeometry gj = geom.short_axis_common();
  const Affine world = gi.world_from_normalized() * gt_forward * gj.normalized_from_world();
  PhantomPair pair = render_pair(spec, world * spec.pose, spec.pose, geom, noise_sigma, seed);
  pair.gt = GroundTruth::from_forward(gt_forward);
  return pair;
}

AnalyticSegmenter::AnalyticSegmenter(const PhantomSpec& spec, GridGeometry grid)
    : grid_(std::move(grid)),
      logit_scale_(spec.logit_scale),
      intensity_width_(spec.intensity_width) {
  spec.validate();
  grid_.validate();
  const Affine local_from_voxel = spec.canonical_pose(grid_).inverse() * grid_.world_from_voxel();
  const Eigen::Array4d levels(spec.levels.background, spec.levels.lv, spec.levels.myo,
                              spec.levels.rv);
  prior_.resize(grid_.voxel_count(), kNumClasses);
  template_.resize(grid_.voxel_count());
  std::int64_t i = 0;
  for (int z = 0; z < grid_.shape[2]; ++z)
    for (int y = 0; y < grid_.shape[1]; ++y)
      for (int x = 0; x < grid_.shape[0]; ++x, ++i) {
        const Eigen::Vector3d p = (local_from_voxel * Eigen::Vector4d(x, y, z, 1.0)).head<3>();
        prior_.row(i) = spec.memberships_at_local(p, spec.prior_width_mm).transpose();
        template_[i] = (spec.memberships_at_local(p, spec.sigma_mm) * levels).sum();
      }
  centred_prior_ = prior_ - 0.5;
}

void AnalyticSegmenter::require_grid(const Volume& image) const {
  if (!image.geometry().same_grid(grid_, 1e-6))
    throw std::invalid_argument("analytic segmenter: image is not on the task grid");
}

Eigen::ArrayXd AnalyticSegmenter::agreement(const Volume& image) const {
  const double w2 = intensity_width_ * intensity_width_;
  return (-(image.data() - template_).square() / (2.0 * w2)).exp();
}

Eigen::ArrayXXd AnalyticSegmenter::probabilities(const Volume& image) const {
  const Eigen::ArrayXd gate = logit_scale_ * agreement(image);
  Eigen::ArrayXXd l = centred_prior_.colwise() * gate;
  const Eigen::ArrayXd top = l.rowwise().maxCoeff();
  l = (l.colwise() - top).exp();
  const Eigen::ArrayXd sum = l.rowwise().sum();
  l.colwise() /= sum;
  return l;
}

ProbabilityVolume AnalyticSegmenter::evaluate(const Volume& image) const {
  require_grid(image);
  return {grid_, probabilities(image)};
}

// logit_c = L g(I) (m_c - 1/2), so dlogit_c/dI = L g'(I) (m_c - 1/2) and
// dq_c/dI = q_c (dlogit_c - sum_k q_k dlogit_k).
Eigen::ArrayXd AnalyticSegmenter::vjp(const Volume& image, const Eigen::ArrayXXd& q,
                                      const Eigen::ArrayXXd& upstream) const {
  if (upstream.rows() != image.size() || upstream.cols() != kNumClasses)
    throw std::invalid_argument("analytic segmenter: upstream shape mismatch");
  const double w2 = intensity_width_ * intensity_width_;
  const Eigen::ArrayXd dgate =
      -logit_scale_ / w2 * (image.data() - template_) * agreement(image);
  const Eigen::ArrayXd mean_m = (q * centred_prior_).rowwise().sum();
  const Eigen::ArrayXd inner = (upstream * q * (centred_prior_.colwise() - mean_m)).rowwise().sum();
  return inner * dgate;
}

Eigen::ArrayXd AnalyticSegmenter::backward(const Volume& image,
                                           const Eigen::ArrayXXd& upstream) const {
  require_grid(image);
  return vjp(image, probabilities(image), upstream);
}

Eigen::ArrayXd AnalyticSegmenter::backward(const Volume& image, const ProbabilityVolume& q,
                                           const Eigen::ArrayXXd& upstream) const {
  require_grid(image);
  if (q.q.rows() != image.size() || q.q.cols() != kNumClasses)
    throw std::invalid_argument("analytic segmenter: probability shape mismatch");
  return vjp(image, q.q, upstream);
}

}  // namespace rigidda
