// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include "rigidda/apply.hpp"
#include "rigidda/errors.hpp"
#include "rigidda/io.hpp"
#include "rigidda/losses.hpp"
#include "rigidda/metrics.hpp"
#include "rigidda/optim.hpp"
#include "rigidda/pipeline.hpp"
#include "rigidda/registration.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

using namespace rigidda;
using fixtures::Rng;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmtd(double v, int prec = 3) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

void progress(const std::string& msg) { std::cerr << "  " << msg << std::endl; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1. Euler matrices: unit determinant and exact inverses.
Outcome euler_validity() {
  Rng rng(1001);
  const Clock clock;
  double worst_det = 0.0, worst_inv = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const AffineSet s = euler_to_affine(fixtures::random_params(rng, std::numbers::pi, 1.0, false));
    worst_det = std::max(worst_det, std::abs(s.forward.determinant() - 1.0));
    worst_det = std::max(worst_det, std::abs(s.task.determinant() - 1.0));
    const Affine e1 = s.forward * s.inverse - Affine::Identity();
    const Affine e2 = s.task * s.task_inverse - Affine::Identity();
    worst_inv = std::max({worst_inv, e1.rowwise().lpNorm<1>().maxCoeff(), e2.rowwise().lpNorm<1>().maxCoeff()});
  }
  const double secs = clock.seconds();
  return {worst_det < 1e-9 && worst_inv < 1e-9 && secs < 1.0,
          "max |det-1| " + fmtd(worst_det) + ", max ||M M^-1 - I||inf " + fmtd(worst_inv) + ", " +
              fmtd(secs) + " s"};
}

// 2. Analytic gradients against central differences, per term.
Outcome gradient_check() {
  const Clock clock;
  RigidParams gt;
  gt.phi = 0.15;
  gt.theta = 0.1;
  gt.psi = -0.2;
  gt.t = gt.t_task = Eigen::Vector3d(0.04, -0.06, 0.02);
  const fixtures::GtPair p = fixtures::gt_pair(32, gt);
  const AnalyticSegmenter task(p.spec, p.pair.sax.geometry());
  const LossWeights w;
  const PairObjective full(p.pair.ax, p.pair.sax, p.pair.gt, LossMode::full(), w, &task);
  const PairObjective cycle(p.pair.ax, p.pair.sax, p.pair.gt, LossMode::cycle_only(), w, &task);
  const PairObjective mse(p.pair.ax, p.pair.sax, p.pair.gt, LossMode::baseline(), w);
  const double h = 1e-4, tol = 1e-3;
  Rng rng(1002);
  int ok[3] = {0, 0, 0};
  double worst[3] = {0, 0, 0};
  const int points = 20;
  for (int i = 0; i < points; ++i) {
    const RigidParams x = RigidParams::from_vector(
        gt.to_vector() + fixtures::random_params(rng, 0.12, 0.08, false).to_vector());
    const ParamVector xv = x.to_vector();

    RigidParams xm = x;
    xm.t_task = xm.t;
    ParamVector g_mse;
    mse.evaluate(xm, &g_mse);
    const ParamVector n_mse = fixtures::central_difference(
        [&](const ParamVector& v) { return mse.evaluate(RigidParams::from_vector(v)).total; }, xm.to_vector(), h);

    ParamVector g_cycle;
    cycle.evaluate(x, &g_cycle);
    const ParamVector n_cycle = fixtures::central_difference(
        [&](const ParamVector& v) { return cycle.evaluate(RigidParams::from_vector(v)).total; }, xv, h);

    // Focus part of the full gradient: full minus cycle, over (angles, t_t).
    ParamVector g_full;
    full.evaluate(x, &g_full);
    ParamVector g_focus = g_full - g_cycle;
    ParamVector n_focus = fixtures::central_difference(
        [&](const ParamVector& v) { return w.alpha2 * full.evaluate(RigidParams::from_vector(v)).focus_smooth; },
        xv, h);
    g_focus.segment<3>(kTx).setZero();
    n_focus.segment<3>(kTx).setZero();

    const double e[3] = {fixtures::gradient_error(g_mse, n_mse), fixtures::gradient_error(g_cycle, n_cycle),
                         fixtures::gradient_error(g_focus, n_focus)};
    for (int k = 0; k < 3; ++k) {
      ok[k] += e[k] < tol;
      worst[k] = std::max(worst[k], e[k]);
    }
  }
  const double secs = clock.seconds();
  const bool pass = ok[0] == points && ok[1] == points && ok[2] == points && secs < 30.0;
  return {pass, "within 1e-3: mse " + std::to_string(ok[0]) + "/20 (worst " + fmtd(worst[0]) + "), cycle " +
                    std::to_string(ok[1]) + "/20 (worst " + fmtd(worst[1]) + "), focus " + std::to_string(ok[2]) +
                    "/20 (worst " + fmtd(worst[2]) + "), " + fmtd(secs) + " s"};
}

// 3. Resample forward then inverse: RMSE over voxels valid both ways.
Outcome cycle_rmse() {
  const fixtures::PhantomVolume ph = fixtures::phantom_volume(64);
  const GridGeometry& g = ph.image.geometry();
  const double range = ph.image.data().maxCoeff() - ph.image.data().minCoeff();
  Rng rng(1003);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const AffineSet m = euler_to_affine(fixtures::random_params(rng, 30 * kDeg, 0.2));
    const SampleResult fwd = transform_volume(ph.image, m.forward, g);
    const SampleResult back = transform_volume(fwd.image, m.inverse, g);
    const SampleResult fwd_valid = transform_volume(fwd.validity.cast<double>(), m.inverse, g);
    double sse = 0.0;
    std::int64_t n = 0;
    for (std::int64_t k = 0; k < back.image.size(); ++k)
      if (back.validity[k] && fwd_valid.image[k] == 1.0) {
        sse += std::pow(back.image[k] - ph.image[k], 2);
        ++n;
      }
    worst = std::max(worst, n ? std::sqrt(sse / double(n)) / range : 1.0);
  }
  return {worst < 0.02, "worst RMSE " + fmtd(100 * worst) + "% of range over 50 transforms"};
}

// 4. Full-mode recovery of known transforms.
Outcome recovery() {
  const int n = 64;
  const double voxel = 2.0 / (n - 1);
  Rng rng(1004);
  int ok = 0;
  double slowest = 0.0;
  std::string lines;
  for (int i = 0; i < 10; ++i) {
    RigidParams gt = fixtures::random_params(rng, 30 * kDeg, 10 * voxel);
    const fixtures::GtPair p = fixtures::gt_pair(n, gt, 0.01, 2000 + i);
    const AnalyticSegmenter task(p.spec, p.pair.sax.geometry());
    const Clock clock;
    const RegistrationResult r =
        register_pair(p.pair.ax, p.pair.sax, p.pair.gt, &task, LossWeights{}, OptimConfig{}, LossMode::full());
    const double secs = clock.seconds();
    slowest = std::max(slowest, secs);
    const double dang = std::max({std::abs(r.params.phi - gt.phi), std::abs(r.params.theta - gt.theta),
                                  std::abs(r.params.psi - gt.psi)}) / kDeg;
    const double dt = (r.params.t - gt.t).cwiseAbs().maxCoeff() / voxel;
    const bool good = dang <= 2.0 && dt <= 1.0 && secs < 120.0;
    ok += good;
    progress("pair " + std::to_string(i) + ": angle err " + fmtd(dang) + " deg, t err " + fmtd(dt) + " vox, " +
             fmtd(secs) + " s" + (good ? "" : "  (miss)"));
  }
  return {ok >= 9, std::to_string(ok) + "/10 within 2 deg and 1 voxel, slowest " + fmtd(slowest) + " s"};
}

// 5. Apex-cropping scenario: task-aware modes should not hurt Dice or focus.
Outcome apex_cropping() {
  const char* names[] = {"baseline", "cycle", "full"};
  double dice[3][kNumForeground] = {};
  double focus[3] = {};
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    const PhantomCase c = apex_cropping_case(std::uint64_t(seed));
    const PhantomPair pair = render_case(c, 0.01, std::uint64_t(seed));
    const AnalyticSegmenter task(c.spec, pair.sax.geometry());
    for (int m = 0; m < 3; ++m) {
      const LossMode mode = LossMode::parse(names[m]);
      const RegistrationResult r =
          m == 0 ? baseline_register(pair.ax, pair.sax.geometry(), pair.gt, OptimConfig{}, &task)
                 : register_pair(pair.ax, pair.sax, pair.gt, &task, LossWeights{}, OptimConfig{}, mode);
      RigidParams p = r.params;
      if (!mode.focus) p.t_task = p.t;
      const ApplyResult a = apply_task(pair.ax, p, task);
      const MetricReport rep = evaluate_labels(a.labels, pair.ax_labels);
      const double f = focus_loss(task.evaluate(a.task_image), LossWeights{}.r, FocusMode::Exact);
      focus[m] += f / seeds;
      std::string d;
      for (int k = 0; k < kNumForeground; ++k) {
        const double v = rep.at(k + 1).dice.value_or(0.0);
        dice[m][k] += v / seeds;
        d += " " + fmtd(v);
      }
      progress("seed " + std::to_string(seed) + " " + names[m] + ": dice" + d + ", focus " + fmtd(f, 4));
    }
  }
  bool pass = focus[2] <= focus[0];
  std::string detail = "mean dice (LV MYO RV)";
  for (int m = 0; m < 3; ++m) {
    detail += std::string(" ") + names[m] + " [";
    for (int k = 0; k < kNumForeground; ++k) detail += (k ? " " : "") + fmtd(dice[m][k]);
    detail += "]";
  }
  for (int k = 0; k < kNumForeground; ++k) pass = pass && dice[2][k] >= dice[1][k] && dice[1][k] >= dice[0][k];
  detail += "; exact focus full " + fmtd(focus[2], 4) + " vs baseline " + fmtd(focus[0], 4);
  return {pass, detail};
}

// 6. Segmentation and focus losses against brute-force oracles.
Outcome loss_oracles() {
  Rng rng(1006);
  double worst = 0.0;
  int empty_columns = 0;
  for (int i = 0; i < 100; ++i) {
    const auto [q, g] = oracles::random_tensors(rng);
    worst = std::max(worst, std::abs(ce(q, g) - oracles::ce(q, g)));
    worst = std::max(worst, std::abs(sdl(q, g) - oracles::sdl(q, g, 1.0)));
    worst = std::max(worst, std::abs(seg_loss(q, g) - (0.5 * oracles::ce(q, g) + oracles::sdl(q, g, 1.0))));
    for (int j = 1; j <= kNumForeground; ++j) {
      worst = std::max(worst, std::abs(bce(q.col(j), g.col(j)) - oracles::bce(q, g, j)));
      worst = std::max(worst, std::abs(soft_dice(q.col(j), g.col(j)) - oracles::dice(q, g, j, 1.0)));
      empty_columns += g.col(j).sum() == 0.0 && q.col(j).sum() == 0.0;
    }
    ProbabilityVolume pv;
    pv.geometry = GridGeometry(Shape(int(q.rows()), 1, 1), Eigen::Vector3d::Ones());
    pv.q = q;
    const double r = rng.uniform(0.05, 0.95);
    worst = std::max(worst, std::abs(focus_loss(pv, r, FocusMode::Exact) - oracles::focus_exact(q, r)));
  }
  // Empty-Dice guard: both sides empty is a perfect score, not 0/0.
  const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(50);
  const double guard = soft_dice(zero, zero);
  const bool pass = worst < 1e-10 && guard == 1.0 && empty_columns > 0;
  return {pass, "max abs error " + fmtd(worst) + " over 100 tensors, empty Dice = " + fmtd(guard) + " (" +
                    std::to_string(empty_columns) + " empty columns seen)"};
}

// 7. Dice and Hausdorff against exhaustive oracles.
Outcome metric_oracles() {
  Rng rng(1007);
  int mismatches = 0, excluded = 0;
  for (int i = 0; i < 200; ++i) {
    const GridGeometry g = fixtures::random_small_grid(rng);
    const LabelVolume p = fixtures::random_blob_labels(g, rng), t = fixtures::random_blob_labels(g, rng);
    for (int c = 1; c <= kNumForeground; ++c) {
      const auto d = dice3d(p, t, c), od = oracles::hard_dice(p, t, c);
      if (d.has_value() != od.has_value() || (d && std::abs(*d - *od) > 1e-12)) ++mismatches;
      const auto h = hausdorff(p, t, c);
      const auto oh = oracles::hausdorff(class_mask(p, c), class_mask(t, c));
      if (h.has_value() != oh.has_value() || (h && std::abs(*h - *oh) > 1e-12 * std::max(1.0, *oh))) ++mismatches;
      excluded += !h.has_value();
    }
  }
  // Empty prediction: Dice 0 and Hausdorff excluded.
  const GridGeometry g = fixtures::cube_grid(8);
  LabelVolume truth(g, std::uint8_t(0));
  truth(3, 3, 3) = truth(4, 3, 3) = 1;
  const MetricReport e = evaluate_labels(LabelVolume(g, std::uint8_t(0)), truth);
  const bool empty_ok = e.at(1).dice == std::optional<double>(0.0) && !e.at(1).hausdorff_mm.has_value();
  return {mismatches == 0 && empty_ok && excluded > 0,
          std::to_string(mismatches) + " mismatches over 200 pairs (" + std::to_string(excluded) +
              " excluded distances), empty prediction " + (empty_ok ? "excluded" : "NOT excluded")};
}

// 8. Label resampling never invents ids and does not depend on the one-hot scale.
Outcome label_safety() {
  Rng rng(1008);
  const GridGeometry g = fixtures::cube_grid(20);
  // Disjoint regions with ids 1 and 3 only: an interpolating resampler would
  // produce 2 between them.
  LabelVolume l(g, std::uint8_t(0));
  for (int z = 0; z < 20; ++z)
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 20; ++x) l(x, y, z) = x < 10 ? 1 : 3;
  int foreign = 0, outside = 0, scale_diff = 0;
  for (int i = 0; i < 20; ++i) {
    const Affine m = euler_to_affine(fixtures::random_params(rng, 0.8, 0.3)).forward;
    const LabelVolume t = transform_labels(l, m, g);
    const Eigen::Matrix<double, 3, 4> vm = voxel_map(m, g, g);
    for (int z = 0; z < 20; ++z)
      for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
          const std::uint8_t v = t(x, y, z);
          if (v != 0 && v != 1 && v != 3) ++foreign;
          if (v == 0) continue;
          // A non-background id must come from one of the 8 source corners.
          const Eigen::Vector3d s = vm * Eigen::Vector4d(x, y, z, 1);
          std::set<int> corners;
          for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
              for (int dx = 0; dx < 2; ++dx) {
                const int cx = std::clamp(int(std::floor(s[0])) + dx, 0, 19);
                const int cy = std::clamp(int(std::floor(s[1])) + dy, 0, 19);
                const int cz = std::clamp(int(std::floor(s[2])) + dz, 0, 19);
                corners.insert(l(cx, cy, cz));
              }
          outside += !corners.count(v);
        }
    const LabelVolume r = fixtures::random_labels(fixtures::cube_grid(12), rng);
    scale_diff += !(transform_labels(r, m, r.geometry(), 100.0).data() ==
                    transform_labels(r, m, r.geometry(), 1.0).data()).all();
  }
  return {foreign == 0 && outside == 0 && scale_diff == 0,
          std::to_string(foreign) + " foreign ids, " + std::to_string(outside) + " ids not from a source corner, " +
              std::to_string(scale_diff) + "/20 maps differ between scale 100 and 1"};
}

// 9. Plateau scheduler: one decay by 0.3, then early stop.
Outcome scheduler() {
  OptimConfig cfg;
  PlateauScheduler s(cfg);
  const double lr0 = s.lr();
  int epoch = 0, decays = 0, decay_epoch = -1, stop_epoch = -1;
  // Improving for 8 epochs, then a flat plateau.
  for (; epoch < 100 && stop_epoch < 0; ++epoch) {
    const double loss = epoch < 8 ? 1.0 - 0.05 * epoch : 0.65;
    const auto ev = s.observe(loss);
    if (ev.decayed) {
      ++decays;
      decay_epoch = epoch;
    }
    if (ev.stop) stop_epoch = epoch;
  }
  const bool pass = decays == 1 && decay_epoch == 7 + cfg.plateau_patience && stop_epoch == 7 + cfg.stop_patience &&
                    std::abs(s.lr() - 0.3 * lr0) <= 1e-18;
  return {pass, std::to_string(decays) + " decay at epoch " + std::to_string(decay_epoch) + ", lr " + fmtd(lr0) +
                    " -> " + fmtd(s.lr()) + ", stop at epoch " + std::to_string(stop_epoch)};
}

// 10. Two end-to-end runs from the same inputs and seed.
Outcome determinism() {
  const fs::path d = fs::temp_directory_path() / "rigidda_acceptance_determinism";
  fs::remove_all(d);
  PipelineConfig cfg;
  const PhantomCase c = demo_case(cfg.grid, cfg.seed);
  write_pair(render_case(c, cfg.noise_sigma, cfg.seed), c.spec, d / "pair");
  cmd_end2end(d / "pair", cfg, d / "a");
  cmd_end2end(d / "pair", cfg, d / "b");
  const bool trace = slurp(d / "a" / "trace.csv") == slurp(d / "b" / "trace.csv");
  const bool metrics = slurp(d / "a" / "metrics.json") == slurp(d / "b" / "metrics.json");
  const bool nonempty = !slurp(d / "a" / "trace.csv").empty();
  fs::remove_all(d);
  return {trace && metrics && nonempty, std::string("trace.csv ") + (trace ? "identical" : "DIFFERS") +
                                            ", metrics.json " + (metrics ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"euler matrices are rigid with exact inverses", euler_validity},
      {"analytic gradients match finite differences", gradient_check},
      {"forward-inverse resampling cycle RMSE", cycle_rmse},
      {"full-mode recovery of known transforms", recovery},
      {"apex cropping: full >= cycle >= baseline", apex_cropping},
      {"loss oracles", loss_oracles},
      {"metric oracles", metric_oracles},
      {"label resampling safety and scale invariance", label_safety},
      {"plateau scheduler", scheduler},
      {"end-to-end determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const Clock clock;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << id << "] " << criteria[i].first << ": " << o.detail
              << "  (" << fmtd(clock.seconds()) << " s)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
