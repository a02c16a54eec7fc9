#include "support/fixtures.hpp"

#include "rigidda/preprocess.hpp"

namespace fixtures {

GridGeometry cube_grid(int n, double spacing) {
  return GridGeometry(Shape(n, n, n), Eigen::Vector3d::Constant(spacing));
}

GridGeometry oblique_grid(Shape shape, Eigen::Vector3d spacing, Rng& rng) {
  const Eigen::Matrix3d d = euler_rotation(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  return GridGeometry(shape, spacing,
                      Eigen::Vector3d(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-20, 20)), d);
}

Volume smooth_volume(const GridGeometry& g, Rng& rng) {
  Volume v(g, 0.0);
  struct Blob {
    Eigen::Vector3d c;
    double w, a;
  };
  std::vector<Blob> blobs;
  for (int k = 0; k < 5; ++k)
    blobs.push_back({Eigen::Vector3d(rng.uniform(0.2, 0.8) * (g.shape[0] - 1),
                                     rng.uniform(0.2, 0.8) * (g.shape[1] - 1),
                                     rng.uniform(0.2, 0.8) * (g.shape[2] - 1)),
                     rng.uniform(0.15, 0.3) * g.shape.maxCoeff(), rng.uniform(0.3, 1.0)});
  const Eigen::Vector3d slope(rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01));
  for (int z = 0; z < g.shape[2]; ++z)
    for (int y = 0; y < g.shape[1]; ++y)
      for (int x = 0; x < g.shape[0]; ++x) {
        const Eigen::Vector3d p(x, y, z);
        double s = slope.dot(p);
        for (const Blob& b : blobs) s += b.a * std::exp(-(p - b.c).squaredNorm() / (2 * b.w * b.w));
        v(x, y, z) = s;
      }
  return v;
}

PhantomSpec centred_spec(const GridGeometry& g) {
  PhantomSpec s;
  s.pose = s.canonical_pose(g);
  return s;
}

PhantomVolume phantom_volume(int n, double noise, std::uint64_t seed) {
  const GridGeometry g = cube_grid(n, 96.0 / (n - 1));
  PhantomVolume out;
  out.spec = centred_spec(g);
  PhantomImage img = generate_phantom(out.spec, g, noise, seed);
  out.image = std::move(img.image);
  out.labels = std::move(img.labels);
  return out;
}

PairGeometry cube_pair_geometry(int n) {
  PairGeometry geom;
  const double iso = 96.0 / (n - 1);
  geom.axial = GridGeometry({74, 74, 16}, {1.3, 1.3, 6.0});
  geom.axial.origin = -geom.axial.center_world();
  geom.short_axis = GridGeometry({71, 71, 12}, {1.35, 1.35, 8.0}, Eigen::Vector3d::Zero(),
                                 euler_rotation(0.35, -0.25, 0.15));
  geom.short_axis.origin = -geom.short_axis.center_world();
  geom.common_shape = Shape(n, n, n);
  geom.iso_mm = iso;
  return geom;
}

GtPair gt_pair(int n, const RigidParams& gt, double noise, std::uint64_t seed, PhantomSpec base) {
  const PairGeometry geom = cube_pair_geometry(n);
  GtPair out;
  out.spec = base;
  out.spec.pose = out.spec.canonical_pose(geom.short_axis_common());
  out.pair = make_pair_with_gt(out.spec, euler_to_affine(gt).forward, geom, noise, seed);
  out.gt = gt;
  return out;
}

RigidParams random_params(Rng& rng, double max_angle, double max_t, bool tie_task) {
  RigidParams p;
  p.phi = rng.uniform(-max_angle, max_angle);
  p.theta = rng.uniform(-max_angle, max_angle);
  p.psi = rng.uniform(-max_angle, max_angle);
  for (int k = 0; k < 3; ++k) p.t[k] = rng.uniform(-max_t, max_t);
  for (int k = 0; k < 3; ++k) p.t_task[k] = tie_task ? p.t[k] : rng.uniform(-max_t, max_t);
  return p;
}

Mask random_mask(const GridGeometry& g, Rng& rng, double density) {
  Mask m(g, std::uint8_t(0));
  for (std::int64_t i = 0; i < m.size(); ++i) m[i] = rng.uniform() < density;
  return m;
}

LabelVolume random_labels(const GridGeometry& g, Rng& rng) {
  LabelVolume l(g, std::uint8_t(0));
  for (std::int64_t i = 0; i < l.size(); ++i) l[i] = std::uint8_t(rng.integer(0, 3));
  return l;
}

GridGeometry random_small_grid(Rng& rng) {
  return GridGeometry(Shape(rng.integer(1, 16), rng.integer(1, 16), rng.integer(1, 16)),
                      Eigen::Vector3d(rng.uniform(0.5, 2.5), rng.uniform(0.5, 2.5), rng.uniform(0.5, 8.0)));
}

LabelVolume random_blob_labels(const GridGeometry& g, Rng& rng) {
  LabelVolume l(g, std::uint8_t(0));
  const int boxes = rng.integer(0, 5);
  for (int b = 0; b < boxes; ++b) {
    const int c = rng.integer(1, 3);
    Eigen::Array3i lo, hi;
    for (int k = 0; k < 3; ++k) {
      lo[k] = rng.integer(0, g.shape[k] - 1);
      hi[k] = std::min(g.shape[k] - 1, lo[k] + rng.integer(0, 6));
    }
    for (int z = lo[2]; z <= hi[2]; ++z)
      for (int y = lo[1]; y <= hi[1]; ++y)
        for (int x = lo[0]; x <= hi[0]; ++x) l(x, y, z) = std::uint8_t(c);
  }
  for (std::int64_t i = 0; i < l.size(); ++i)
    if (rng.uniform() < 0.03) l[i] = std::uint8_t(rng.integer(0, 3));
  return l;
}

}  // namespace fixtures
