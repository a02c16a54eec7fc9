#include "rigidda/pipeline.hpp"

#include "rigidda/io.hpp"
#include "rigidda/preprocess.hpp"

#include <unistd.h>

#include <atomic>
#include <random>

namespace rigidda {

namespace fs = std::filesystem;

PairFiles PairFiles::in(const fs::path& dir) {
  return {dir / "I.nii", dir / "J.nii", dir / "I_labels.nii", dir / "J_labels.nii",
          dir / "gtM.json", dir / "spec.json"};
}

namespace {

PairGeometry pair_geometry(const GridSpec& grid) {
  PairGeometry g;
  g.common_shape = grid.common_shape;
  g.iso_mm = grid.iso_mm;
  g.quantile = grid.quantile;
  g.sax_z_shift_mm = grid.sax_z_shift_mm;
  return g;
}

GridGeometry centred_at(GridGeometry g, const Eigen::Vector3d& centre) {
  g.origin += centre - g.center_world();
  return g;
}

// Heart with its bounding-box centre at `centre` and long axis along `axes`.
PhantomSpec placed_phantom(const Eigen::Matrix3d& axes, const Eigen::Vector3d& centre) {
  PhantomSpec spec;
  const auto [lo, hi] = spec.local_bounds();
  spec.pose.topLeftCorner<3, 3>() = axes;
  spec.pose.topRightCorner<3, 1>() = centre - axes * (0.5 * (lo + hi));
  return spec;
}

PhantomCase oblique_case(const GridSpec& grid, std::uint64_t seed, double base_shift_mm) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double deg = M_PI / 180.0;
  const Eigen::Matrix3d axes =
      euler_rotation((20.0 + 5.0 * u(rng)) * deg, (-15.0 + 5.0 * u(rng)) * deg, 10.0 * u(rng) * deg);
  const Eigen::Vector3d centre(4.0 * u(rng), 4.0 * u(rng), 4.0 * u(rng));

  PhantomCase c;
  c.spec = placed_phantom(axes, centre);
  c.geometry = pair_geometry(grid);
  c.geometry.axial = centred_at(GridGeometry({74, 74, 16}, {1.3, 1.3, 6.0}), Eigen::Vector3d::Zero());
  c.geometry.short_axis =
      centred_at(GridGeometry({71, 71, 12}, {1.35, 1.35, 8.0}, Eigen::Vector3d::Zero(), axes),
                 centre + axes.col(2) * base_shift_mm);
  return c;
}

}  // namespace

PhantomCase demo_case(const GridSpec& grid, std::uint64_t seed) {
  return oblique_case(grid, seed, 0.0);
}

PhantomCase apex_cropping_case(std::uint64_t seed, const GridSpec& grid) {
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return oblique_case(grid, seed, 25.0 + 3.0 * u(rng));
}

PhantomPair render_case(const PhantomCase& c, double noise_sigma, std::uint64_t seed) {
  return make_pair(c.spec, c.rel, c.geometry, noise_sigma, seed);
}

void write_pair(const PhantomPair& pair, const PhantomSpec& spec, const fs::path& out_dir) {
  const PairFiles f = PairFiles::in(out_dir);
  AtomicOutputs out;
  write_volume(pair.ax, out.stage(f.ax));
  write_volume(pair.sax, out.stage(f.sax));
  write_labels(pair.ax_labels, out.stage(f.ax_labels));
  write_labels(pair.sax_labels, out.stage(f.sax_labels));
  write_json(transform_json(pair.gt.forward), out.stage(f.gt));
  write_json(to_json(spec), out.stage(f.spec));
  out.commit();
}

LoadedPair load_pair(const PairFiles& files) {
  LoadedPair p;
  p.ax = read_volume(files.ax);
  p.sax = read_volume(files.sax);
  if (fs::exists(files.ax_labels)) {
    p.ax_labels = read_labels(files.ax_labels);
    if (!(p.ax_labels->shape() == p.ax.shape()).all())
      throw std::invalid_argument("axial labels do not match the axial volume grid");
  }
  if (fs::exists(files.gt)) {
    p.gt = GroundTruth::from_forward(transform_from_json(read_json(files.gt)));
  } else {
    p.gt = GroundTruth::from_forward(p.ax.geometry().normalized_from_world() *
                                     p.sax.geometry().world_from_normalized());
  }
  if (fs::exists(files.spec)) p.spec = spec_from_json(read_json(files.spec));
  return p;
}

AnalyticSegmenter make_task(const LoadedPair& pair) {
  return AnalyticSegmenter(pair.spec, pair.sax.geometry());
}

RegistrationResult run_register(const LoadedPair& pair, const PipelineConfig& cfg) {
  cfg.validate();
  const AnalyticSegmenter task = make_task(pair);
  if (!cfg.mode.cycle && !cfg.mode.in_plane && !cfg.mode.focus)
    return baseline_register(pair.ax, pair.sax.geometry(), pair.gt, cfg.optim, &task);
  return register_pair(pair.ax, pair.sax, pair.gt, &task, cfg.weights, cfg.optim, cfg.mode);
}

End2EndResult cmd_end2end(const fs::path& pair_dir, const PipelineConfig& cfg,
                          const fs::path& out_dir) {
  run_stage("config", [&] { cfg.validate(); });
  const LoadedPair pair = run_stage("load", [&] { return load_pair(PairFiles::in(pair_dir)); });
  if (!pair.ax_labels)
    throw std::invalid_argument("[load] pair directory has no I_labels.nii to evaluate against");

  End2EndResult r;
  r.registration = run_stage("register", [&] { return run_register(pair, cfg); });
  r.params = r.registration.params;
  if (!cfg.mode.focus) r.params.t_task = r.params.t;

  const ApplyResult applied = run_stage("apply", [&] {
    const AnalyticSegmenter task = make_task(pair);
    return apply_task(pair.ax, r.params, task, cfg.post);
  });
  r.report = run_stage("eval", [&] {
    return evaluate_labels(applied.labels, *pair.ax_labels, pair_dir.filename().string());
  });

  run_stage("write", [&] {
    AtomicOutputs out;
    write_text(trace_csv(r.registration.trace), out.stage(out_dir / "trace.csv"));
    write_json(transform_json(r.params), out.stage(out_dir / "transform.json"));
    write_labels(applied.labels, out.stage(out_dir / "pred_labels.nii"));
    write_json(to_json(r.report), out.stage(out_dir / "metrics.json"));
    write_text(metrics_csv({r.report}), out.stage(out_dir / "metrics.csv"));
    write_json(to_json(cfg), out.stage(out_dir / "config.json"));
    out.commit();
  });
  return r;
}

AtomicOutputs::~AtomicOutputs() {
  if (committed_) return;
  std::error_code ec;
  for (const Entry& e : entries_) fs::remove(e.temp, ec);
  for (auto it = created_dirs_.rbegin(); it != created_dirs_.rend(); ++it) fs::remove(*it, ec);
}

fs::path AtomicOutputs::stage(const fs::path& final_path) {
  if (committed_) throw std::logic_error("AtomicOutputs: already committed");
  const fs::path parent = final_path.parent_path().empty() ? fs::path(".") : final_path.parent_path();
  if (!fs::exists(parent)) {
    std::vector<fs::path> missing;
    for (fs::path p = parent; !p.empty() && !fs::exists(p); p = p.parent_path()) missing.push_back(p);
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec) throw IoError(IoErrorCode::WriteFailed, parent.string() + ": " + ec.message());
    created_dirs_.insert(created_dirs_.end(), missing.rbegin(), missing.rend());
  }
  static std::atomic<unsigned> counter{0};
  const std::string tag = ".partial-" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
  const fs::path ext = final_path.extension();
  const fs::path temp = parent / ("." + final_path.stem().string() + tag + ext.string());
  entries_.push_back({temp, final_path});
  if (ext == ".json" || ext == ".raw") {
    // a sidecar volume writes both halves
    const fs::path other_ext = ext == ".json" ? ".raw" : ".json";
    fs::path t = temp, f = final_path;
    entries_.push_back({t.replace_extension(other_ext), f.replace_extension(other_ext)});
  }
  return temp;
}

void AtomicOutputs::commit() {
  if (committed_) return;
  for (const Entry& e : entries_) {
    if (!fs::exists(e.temp)) continue;  // a .json that was not a sidecar volume
    std::error_code ec;
    fs::rename(e.temp, e.final, ec);
    if (ec) throw IoError(IoErrorCode::WriteFailed, e.final.string() + ": " + ec.message());
  }
  committed_ = true;
}

}  // namespace rigidda
