#include "support/fixtures.hpp"

#include "rigidda/errors.hpp"
#include "rigidda/registration.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

using namespace rigidda;
using fixtures::Rng;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

void check_trace_contract(const RegistrationResult& r, const OptimConfig& cfg) {
  const auto& rows = r.trace.rows;
  REQUIRE_FALSE(rows.empty());
  CHECK(rows.front().params.to_vector() == ParamVector::Zero());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].step == int(i));
    CHECK(rows[i].lr >= cfg.lr_min);
    if (i > 0) CHECK(rows[i].lr <= rows[i - 1].lr);
  }
  CHECK(int(rows.size()) <= cfg.max_steps);
}

bool same_trace(const RegistrationTrace& a, const RegistrationTrace& b) {
  if (a.rows.size() != b.rows.size()) return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const TraceRow &x = a.rows[i], &y = b.rows[i];
    if (x.lr != y.lr || x.loss.total != y.loss.total || x.loss.focus_smooth != y.loss.focus_smooth ||
        x.params.to_vector() != y.params.to_vector())
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("I = J under the identity stays at zero") {
  // Both stacks acquired directly on the common grid: a zero-residual problem
  // for every term, focus included (the presented image is the template).
  PairGeometry geom = fixtures::cube_pair_geometry(32);
  geom.axial = GridGeometry(Shape(32, 32, 32), Eigen::Vector3d::Constant(geom.iso_mm));
  geom.axial.origin = -geom.axial.center_world();
  geom.short_axis = geom.axial;
  PhantomSpec spec;
  spec.pose = spec.canonical_pose(geom.short_axis_common());
  const PhantomPair pair = make_pair(spec, Affine::Identity(), geom);
  REQUIRE((pair.ax.data() == pair.sax.data()).all());
  const AnalyticSegmenter task(spec, pair.sax.geometry());
  OptimConfig cfg;
  cfg.max_steps = 200;
  for (const LossMode mode : {LossMode::baseline(), LossMode::cycle_only(), LossMode::full()}) {
    const RegistrationResult r =
        register_pair(pair.ax, pair.sax, pair.gt, &task, LossWeights{}, cfg, mode);
    CHECK(r.params.to_vector().cwiseAbs().maxCoeff() < 1e-3);
    check_trace_contract(r, cfg);
  }
}

TEST_CASE("recovers 20 degrees about x plus a 0.1 translation") {
  RigidParams gt;
  gt.phi = 20 * kDeg;
  gt.t = gt.t_task = Eigen::Vector3d(0.1, 0.0, 0.0);
  const fixtures::GtPair p = fixtures::gt_pair(32, gt, 0.01, 1);
  const AnalyticSegmenter task(p.spec, p.pair.sax.geometry());
  OptimConfig cfg;
  const RegistrationResult r =
      register_pair(p.pair.ax, p.pair.sax, p.pair.gt, &task, LossWeights{}, cfg, LossMode::full());
  const double voxel = 2.0 / 31.0;
  CHECK(std::abs(r.params.phi - gt.phi) < 2 * kDeg);
  CHECK(std::abs(r.params.theta) < 2 * kDeg);
  CHECK(std::abs(r.params.psi) < 2 * kDeg);
  CHECK((r.params.t - gt.t).cwiseAbs().maxCoeff() < voxel);
  check_trace_contract(r, cfg);
  CHECK(r.trace.rows.back().loss.total < r.trace.rows.front().loss.total);
}

TEST_CASE("baseline: final MSE never exceeds the initial MSE") {
  Rng rng(3);
  for (int trial = 0; trial < 2; ++trial) {
    const RigidParams gt = fixtures::random_params(rng, 10 * kDeg, 0.1);
    const fixtures::GtPair p = fixtures::gt_pair(32, gt, 0.01, trial);
    OptimConfig cfg;
    cfg.max_steps = 400;
    const RegistrationResult r = baseline_register(p.pair.ax, p.pair.sax.geometry(), p.pair.gt, cfg);
    CHECK(r.trace.rows.back().loss.total <= r.trace.rows.front().loss.total);
    for (const TraceRow& row : r.trace.rows) CHECK(row.params.t_task == row.params.t);
    CHECK(r.params.to_vector().segment<3>(kTxTask) == r.params.to_vector().segment<3>(kTx));
    check_trace_contract(r, cfg);
  }
}

TEST_CASE("early stopping ends a flat run after the stop patience") {
  const fixtures::GtPair p = fixtures::gt_pair(24, RigidParams{});
  OptimConfig cfg;
  cfg.epoch_steps = 5;
  cfg.min_delta = 1.0;  // nothing counts as a gain after the first epoch
  const RegistrationResult r =
      register_pair(p.pair.ax, p.pair.sax, p.pair.gt, nullptr, LossWeights{}, cfg, LossMode::baseline());
  CHECK(r.trace.early_stopped);
  // One improving epoch, then stop_patience flat ones.
  CHECK(r.trace.rows.size() == std::size_t(cfg.epoch_steps * (1 + cfg.stop_patience)));
  CHECK(r.trace.decays == 1);
}

TEST_CASE("identical inputs give identical traces") {
  RigidParams gt;
  gt.theta = 8 * kDeg;
  gt.t = gt.t_task = Eigen::Vector3d(0.0, 0.05, -0.03);
  const fixtures::GtPair p = fixtures::gt_pair(24, gt, 0.01, 4);
  const AnalyticSegmenter task(p.spec, p.pair.sax.geometry());
  OptimConfig cfg;
  cfg.max_steps = 150;
  const auto a = register_pair(p.pair.ax, p.pair.sax, p.pair.gt, &task, LossWeights{}, cfg);
  const auto b = register_pair(p.pair.ax, p.pair.sax, p.pair.gt, &task, LossWeights{}, cfg);
  CHECK(same_trace(a.trace, b.trace));
}

TEST_CASE("a non-finite loss aborts") {
  const fixtures::GtPair p = fixtures::gt_pair(24, RigidParams{});
  OptimConfig cfg;
  cfg.max_steps = 10;
  Volume ax = p.pair.ax;
  ax[ax.size() / 2] = std::numeric_limits<double>::quiet_NaN();
  // Rejected up front, or at the first non-finite step.
  CHECK_THROWS(register_pair(ax, p.pair.sax, p.pair.gt, nullptr, LossWeights{}, cfg, LossMode::baseline()));
  LossWeights w;
  w.alpha1 = std::numeric_limits<double>::infinity();
  CHECK_THROWS(register_pair(p.pair.ax, p.pair.sax, p.pair.gt, nullptr, w, cfg, LossMode::baseline()));
}

TEST_CASE("shared rotation gradient is the sum of both paths") {
  RigidParams gt;
  gt.phi = 0.1;
  gt.psi = -0.15;
  gt.t = gt.t_task = Eigen::Vector3d(0.03, 0.02, -0.04);
  const fixtures::GtPair p = fixtures::gt_pair(32, gt);
  const AnalyticSegmenter task(p.spec, p.pair.sax.geometry());
  const LossWeights w;
  const PairObjective full(p.pair.ax, p.pair.sax, p.pair.gt, LossMode::full(), w, &task);
  const PairObjective cycle(p.pair.ax, p.pair.sax, p.pair.gt, LossMode::cycle_only(), w, &task);
  Rng rng(6);
  int ok = 0;
  const int trials = 6;
  for (int t = 0; t < trials; ++t) {
    const RigidParams x = RigidParams::from_vector(
        gt.to_vector() + fixtures::random_params(rng, 0.1, 0.05, false).to_vector());
    ParamVector g_full, g_cycle;
    full.evaluate(x, &g_full);
    cycle.evaluate(x, &g_cycle);
    // Focus path alone: finite differences of alpha2 * smooth focus.
    const ParamVector g_focus = fixtures::central_difference(
        [&](const ParamVector& v) { return w.alpha2 * full.evaluate(RigidParams::from_vector(v)).focus_smooth; },
        x.to_vector(), 1e-4);
    const Eigen::Vector3d expect = g_cycle.head<3>() + g_focus.head<3>();
    const Eigen::Vector3d num = fixtures::central_difference(
        [&](const ParamVector& v) { return full.evaluate(RigidParams::from_vector(v)).total; },
        x.to_vector(), 1e-4).head<3>();
    ok += fixtures::gradient_error(Eigen::Vector3d(g_full.head<3>()), num) < 1e-3 &&
          fixtures::gradient_error(expect, num) < 1e-3;
  }
  CHECK(ok >= trials - 1);
}
