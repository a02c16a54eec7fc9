// rigidda command-line front end.
//
// Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
// failure, 4 I/O error.

#include "rigidda/apply.hpp"
#include "rigidda/config.hpp"
#include "rigidda/errors.hpp"
#include "rigidda/format.hpp"
#include "rigidda/io.hpp"
#include "rigidda/pipeline.hpp"
#include "rigidda/resampler.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rigidda;

namespace {

int log_level() {
  const char* env = std::getenv("RIGIDDA_LOG");
  if (!env) return 1;
  const std::string v = env;
  if (v == "quiet" || v == "0") return 0;
  if (v == "debug" || v == "2") return 2;
  return 1;
}

std::mutex log_mutex;

void log(int level, const std::string& msg) {
  if (level > log_level()) return;
  std::lock_guard<std::mutex> lock(log_mutex);
  std::cerr << "rigidda: " << msg << '\n';
}

double parse_number(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

void apply_weights(const std::string& text, LossWeights& w) {
  for (const std::string& item : split(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--weights expects key=value pairs");
    const std::string key = item.substr(0, eq);
    const double v = parse_number(item.substr(eq + 1));
    if (key == "alpha1") w.alpha1 = v;
    else if (key == "alpha2") w.alpha2 = v;
    else if (key == "w_seg") w.w_seg = v;
    else if (key == "r") w.r = v;
    else if (key == "tau") w.tau = v;
    else if (key == "smooth") w.smooth = v;
    else throw std::invalid_argument("unknown weight '" + key + "'");
  }
  w.validate();
}

// Nine comma-separated numbers, or a transform JSON file.
RigidParams parse_params(const std::string& text) {
  if (fs::exists(text)) return params_from_json(read_json(text));
  const auto parts = split(text, ',');
  if (parts.size() != kNumParams && parts.size() != 6)
    throw std::invalid_argument("parameters: expected 6 or 9 numbers or a transform file");
  ParamVector v = ParamVector::Zero();
  for (std::size_t i = 0; i < parts.size(); ++i) v[Eigen::Index(i)] = parse_number(parts[i]);
  if (parts.size() == 6) v.segment<3>(kTxTask) = v.segment<3>(kTx);
  return RigidParams::from_vector(v);
}

void print_json(const json& j) { std::cout << j.dump(2) << std::endl; }

struct Common {
  std::string config_path;
  int jobs = 0;
  PipelineConfig config;
};

PipelineConfig load_config(const Common& c) {
  PipelineConfig cfg;
  if (!c.config_path.empty()) cfg = config_from_json(read_json(c.config_path));
  if (c.jobs > 0) cfg.jobs = c.jobs;
  return cfg;
}

PhantomSpec load_spec(const std::string& path) {
  return path.empty() ? PhantomSpec{} : spec_from_json(read_json(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rigidda: differentiable rigid AX/SAX registration with a task-driven focus loss"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "JSON config overriding the defaults");
  app.add_option("--jobs", common.jobs, "independent pairs processed in parallel")->check(CLI::PositiveNumber);

  // phantom-gen
  auto* gen = app.add_subcommand("phantom-gen", "render a phantom AX/SAX pair with known transform");
  std::string gen_spec, gen_rel, gen_out, gen_scenario = "demo";
  std::optional<std::uint64_t> gen_seed;
  std::optional<double> gen_noise;
  gen->add_option("--spec", gen_spec, "phantom spec JSON");
  gen->add_option("--rel-transform", gen_rel, "world-mm rigid transform JSON {\"matrix\": [16]} applied to J's phantom");
  gen->add_option("--scenario", gen_scenario, "acquisition geometry")->check(CLI::IsMember({"demo", "apex"}));
  gen->add_option("--seed", gen_seed, "geometry jitter and noise seed");
  gen->add_option("--noise", gen_noise, "noise standard deviation");
  gen->add_option("--out-dir", gen_out, "output pair directory")->required();

  // register
  auto* reg = app.add_subcommand("register", "optimize the nine rigid parameters of a pair");
  std::string reg_ax, reg_sax, reg_gt, reg_spec, reg_weights, reg_mode, reg_trace, reg_dump;
  std::optional<int> reg_steps;
  std::optional<double> reg_lr;
  reg->add_option("--ax", reg_ax, "axial volume I")->required();
  reg->add_option("--sax", reg_sax, "short-axis volume J")->required();
  reg->add_option("--gt-transform", reg_gt, "ground-truth transform JSON (default: header geometry)");
  reg->add_option("--spec", reg_spec, "phantom spec for the task module");
  reg->add_option("--weights", reg_weights, "e.g. alpha1=1.0,alpha2=0.1");
  reg->add_option("--mode", reg_mode, "loss mode")->check(CLI::IsMember({"baseline", "cycle", "cycle+focus", "full"}));
  reg->add_option("--trace", reg_trace, "trace CSV output");
  reg->add_option("--dump-transform", reg_dump, "transform JSON output");
  reg->add_option("--max-steps", reg_steps, "step budget");
  reg->add_option("--lr0", reg_lr, "initial learning rate");

  // resample
  auto* res = app.add_subcommand("resample", "pull-resample a volume under a normalized-space transform");
  std::string res_in, res_tf, res_like, res_out;
  bool res_labels = false;
  res->add_option("--input", res_in, "source volume")->required();
  res->add_option("--transform", res_tf, "transform JSON file or 6/9 comma-separated params")->required();
  res->add_option("--target-like", res_like, "volume whose grid is the target")->required();
  res->add_flag("--labels", res_labels, "treat the input as a label map");
  res->add_option("--output", res_out, "output volume")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Dice, Hausdorff and volumes of a prediction");
  std::string ev_pred, ev_truth, ev_spacing, ev_csv, ev_json;
  bool ev_post = false;
  ev->add_option("--pred", ev_pred, "predicted labels")->required();
  ev->add_option("--truth", ev_truth, "reference labels")->required();
  ev->add_option("--spacing-from", ev_spacing, "volume whose spacing is used for mm and ml");
  ev->add_flag("--post", ev_post, "post-process the prediction first");
  ev->add_option("--csv", ev_csv, "metrics CSV output");
  ev->add_option("--json", ev_json, "metric report JSON output");

  // losses-check
  auto* lc = app.add_subcommand("losses-check", "print every loss term for given parameters");
  std::string lc_ax, lc_sax, lc_gt, lc_spec, lc_params = "0,0,0,0,0,0,0,0,0", lc_mode, lc_weights, lc_seg;
  lc->add_option("--ax", lc_ax, "axial volume I")->required();
  lc->add_option("--sax", lc_sax, "short-axis volume J")->required();
  lc->add_option("--gt-transform", lc_gt, "ground-truth transform JSON (default: header geometry)");
  lc->add_option("--spec", lc_spec, "phantom spec for the task module");
  lc->add_option("--params", lc_params, "transform JSON file or 6/9 comma-separated params");
  lc->add_option("--mode", lc_mode, "loss mode")->check(CLI::IsMember({"baseline", "cycle", "cycle+focus", "full"}));
  lc->add_option("--weights", lc_weights, "e.g. alpha1=1.0,alpha2=0.1");
  lc->add_option("--seg-truth", lc_seg, "labels on J's grid for the segmentation terms");

  // apply
  auto* ap = app.add_subcommand("apply", "segment an axial stack through the task domain");
  std::string ap_ax, ap_params, ap_like, ap_spec, ap_out;
  bool ap_no_post = false;
  ap->add_option("--ax", ap_ax, "axial volume I")->required();
  ap->add_option("--params", ap_params, "transform JSON from register, or 6/9 params")->required();
  ap->add_option("--task-grid-like", ap_like, "volume whose grid the task module expects")->required();
  ap->add_option("--spec", ap_spec, "phantom spec for the task module");
  ap->add_flag("--no-post", ap_no_post, "skip post-processing");
  ap->add_option("--output", ap_out, "label output on the axial grid")->required();

  // end2end
  auto* e2e = app.add_subcommand("end2end", "register, apply and evaluate one or more pair directories");
  std::vector<std::string> e2e_pairs;
  std::string e2e_out, e2e_mode;
  std::optional<std::uint64_t> e2e_seed;
  e2e->add_option("--pair-dir", e2e_pairs, "pair directory from phantom-gen (repeatable)")->required();
  e2e->add_option("--out-dir", e2e_out, "artifact directory")->required();
  e2e->add_option("--mode", e2e_mode, "loss mode")->check(CLI::IsMember({"baseline", "cycle", "cycle+focus", "full"}));
  e2e->add_option("--seed", e2e_seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    PipelineConfig cfg = load_config(common);

    if (*gen) {
      if (gen_seed) cfg.seed = *gen_seed;
      if (gen_noise) cfg.noise_sigma = *gen_noise;
      cfg.validate();
      PhantomCase c = gen_scenario == "apex" ? apex_cropping_case(cfg.seed, cfg.grid)
                                             : demo_case(cfg.grid, cfg.seed);
      if (!gen_spec.empty()) {
        const Affine pose = c.spec.pose;
        c.spec = load_spec(gen_spec);
        if (!read_json(gen_spec).contains("pose")) c.spec.pose = pose;
      }
      if (!gen_rel.empty()) c.rel = transform_from_json(read_json(gen_rel));
      log(1, "rendering " + gen_scenario + " pair, seed " + std::to_string(cfg.seed));
      const PhantomPair pair = render_case(c, cfg.noise_sigma, cfg.seed);
      for (const auto& w : pair.warnings) log(1, "warning: " + w);
      write_pair(pair, c.spec, gen_out);
      print_json({{"out_dir", gen_out}, {"gt", transform_json(pair.gt.forward)}, {"warnings", pair.warnings}});
      return 0;
    }

    if (*reg) {
      if (!reg_weights.empty()) apply_weights(reg_weights, cfg.weights);
      if (!reg_mode.empty()) cfg.mode = LossMode::parse(reg_mode);
      if (reg_steps) cfg.optim.max_steps = *reg_steps;
      if (reg_lr) cfg.optim.lr0 = *reg_lr;
      cfg.validate();
      LoadedPair pair;
      pair.ax = read_volume(reg_ax);
      pair.sax = read_volume(reg_sax);
      pair.gt = reg_gt.empty() ? GroundTruth::from_forward(pair.ax.geometry().normalized_from_world() *
                                                           pair.sax.geometry().world_from_normalized())
                               : GroundTruth::from_forward(transform_from_json(read_json(reg_gt)));
      pair.spec = load_spec(reg_spec);
      log(1, "registering in mode " + cfg.mode.name());
      const RegistrationResult r = run_register(pair, cfg);
      RigidParams p = r.params;
      if (!cfg.mode.focus) p.t_task = p.t;
      AtomicOutputs out;
      if (!reg_trace.empty()) write_text(trace_csv(r.trace), out.stage(reg_trace));
      if (!reg_dump.empty()) write_json(transform_json(p), out.stage(reg_dump));
      out.commit();
      print_json({{"steps", r.trace.rows.size()},
                  {"early_stopped", r.trace.early_stopped},
                  {"decays", r.trace.decays},
                  {"transform", transform_json(p)},
                  {"final_loss", to_json(r.trace.rows.back().loss)}});
      return 0;
    }

    if (*res) {
      const RigidParams p = parse_params(res_tf);
      Affine m;
      if (fs::exists(res_tf)) m = transform_from_json(read_json(res_tf));
      else m = euler_to_affine(p).forward;
      const GridGeometry target = read_volume(res_like).geometry();
      AtomicOutputs out;
      if (res_labels) {
        write_labels(transform_labels(read_labels(res_in), m, target), out.stage(res_out));
      } else {
        write_volume(transform_volume(read_volume(res_in), m, target).image, out.stage(res_out));
      }
      out.commit();
      return 0;
    }

    if (*ev) {
      LabelVolume pred = read_labels(ev_pred);
      LabelVolume truth = read_labels(ev_truth);
      if (!ev_spacing.empty()) {
        const GridGeometry g = read_volume(ev_spacing).geometry();
        if (!(g.shape == truth.shape()).all())
          throw std::invalid_argument("--spacing-from volume has a different shape");
        pred = LabelVolume(g, pred.data());
        truth = LabelVolume(g, truth.data());
      }
      if (ev_post) pred = postprocess(pred);
      const MetricReport r = evaluate_labels(pred, truth, fs::path(ev_pred).stem().string());
      AtomicOutputs out;
      if (!ev_csv.empty()) write_text(metrics_csv({r}), out.stage(ev_csv));
      if (!ev_json.empty()) write_json(to_json(r), out.stage(ev_json));
      out.commit();
      print_json(to_json(r));
      return 0;
    }

    if (*lc) {
      if (!lc_weights.empty()) apply_weights(lc_weights, cfg.weights);
      if (!lc_mode.empty()) cfg.mode = LossMode::parse(lc_mode);
      const Volume ax = read_volume(lc_ax), sax = read_volume(lc_sax);
      const GroundTruth gt =
          lc_gt.empty() ? GroundTruth::from_forward(ax.geometry().normalized_from_world() *
                                                    sax.geometry().world_from_normalized())
                        : GroundTruth::from_forward(transform_from_json(read_json(lc_gt)));
      const AnalyticSegmenter task(load_spec(lc_spec), sax.geometry());
      const RigidParams p = parse_params(lc_params);
      LossWeights w = cfg.weights;
      if (!cfg.mode.focus) w.alpha2 = 0.0;
      LossReport rep = PairObjective(ax, sax, gt, cfg.mode, w, &task).evaluate(p);
      if (!lc_seg.empty()) {
        const LabelVolume truth = read_labels(lc_seg);
        if (!truth.geometry().same_grid(sax.geometry(), 1e-4))
          throw std::invalid_argument("--seg-truth must lie on J's grid");
        RigidParams q = p;
        if (!cfg.mode.focus) q.t_task = q.t;
        const Volume it = transform_volume(ax, euler_to_affine(q).task, task.grid()).image;
        const ProbabilityVolume probs = task.evaluate(it);
        const Eigen::ArrayXXd g = one_hot(truth);
        rep.seg_ce = ce(probs.q, g);
        rep.seg_sdl = sdl(probs.q, g, cfg.weights.smooth);
        rep.seg_total = seg_loss(probs.q, g, cfg.weights.w_seg, cfg.weights.smooth);
      }
      print_json(to_json(rep));
      return 0;
    }

    if (*ap) {
      LoadedPair pair;
      pair.ax = read_volume(ap_ax);
      pair.sax = read_volume(ap_like);
      pair.spec = load_spec(ap_spec);
      const RigidParams p = parse_params(ap_params);
      const AnalyticSegmenter task = make_task(pair);
      const ApplyResult r = apply_task(pair.ax, p, task, !ap_no_post);
      AtomicOutputs out;
      write_labels(r.labels, out.stage(ap_out));
      out.commit();
      return 0;
    }

    if (*e2e) {
      if (!e2e_mode.empty()) cfg.mode = LossMode::parse(e2e_mode);
      if (e2e_seed) cfg.seed = *e2e_seed;
      cfg.optim.seed = cfg.seed;
      cfg.validate();
      const bool many = e2e_pairs.size() > 1;
      std::vector<MetricReport> reports(e2e_pairs.size());
      std::vector<std::exception_ptr> errors(e2e_pairs.size());
      std::atomic<std::size_t> next{0};
      auto worker = [&] {
        for (std::size_t i = next++; i < e2e_pairs.size(); i = next++) {
          try {
            const fs::path pd = e2e_pairs[i];
            const fs::path od = many ? fs::path(e2e_out) / pd.filename() : fs::path(e2e_out);
            log(1, "end2end " + pd.string() + " (mode " + cfg.mode.name() + ")");
            reports[i] = cmd_end2end(pd, cfg, od).report;
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      };
      const int threads = std::min<int>(cfg.jobs, int(e2e_pairs.size()));
      std::vector<std::thread> pool;
      for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
      worker();
      for (auto& t : pool) t.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
      if (many) {
        AtomicOutputs out;
        write_text(metrics_csv(reports), out.stage(fs::path(e2e_out) / "metrics.csv"));
        write_text(bland_altman_csv(bland_altman(reports)), out.stage(fs::path(e2e_out) / "bland_altman.csv"));
        out.commit();
      }
      json all = json::array();
      for (const auto& r : reports) all.push_back(to_json(r));
      print_json(many ? all : all[0]);
      return 0;
    }
  } catch (const IoError& e) {
    log(0, std::string("I/O error: ") + e.what());
    return 4;
  } catch (const NumericalError& e) {
    log(0, std::string("numerical failure: ") + e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    log(0, std::string("invalid input: ") + e.what());
    return 2;
  } catch (const std::exception& e) {
    log(0, std::string("error: ") + e.what());
    return 1;
  }
  return 0;
}
