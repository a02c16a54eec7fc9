#include "rigidda/config.hpp"

#include "rigidda/embedded_schemas.hpp"
#include "rigidda/errors.hpp"
#include "rigidda/format.hpp"
#include "rigidda/schema.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

namespace rigidda {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
  weights.validate();
  optim.validate();
  if ((grid.common_shape < 2).any())
    throw std::invalid_argument("grid.common_shape needs at least 2 voxels per axis");
  if (!(grid.iso_mm > 0.0)) throw std::invalid_argument("grid.iso_mm must be positive");
  if (!(grid.quantile > 0.0 && grid.quantile <= 1.0))
    throw std::invalid_argument("grid.quantile must lie in (0, 1]");
  if (!std::isfinite(grid.sax_z_shift_mm))
    throw std::invalid_argument("grid.sax_z_shift_mm must be finite");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be non-negative");
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
  if (mode.focus && weights.alpha2 == 0.0)
    throw std::invalid_argument("modes with the focus term need alpha2 > 0");
}

const json& schema(SchemaId id) {
  static const json config = json::parse(embedded::pipeline_config);
  static const json spec = json::parse(embedded::phantom_spec);
  static const json transform = json::parse(embedded::transform);
  static const json report = json::parse(embedded::metric_report);
  switch (id) {
    case SchemaId::PipelineConfig: return config;
    case SchemaId::PhantomSpec: return spec;
    case SchemaId::Transform: return transform;
    case SchemaId::MetricReport: return report;
  }
  throw std::logic_error("unknown schema id");
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorCode::NotFound, path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(IoErrorCode::MalformedHeader, path.string() + ": " + e.what());
  }
}

void write_text(const std::string& text, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrorCode::WriteFailed, path.string());
  out << text;
  out.flush();
  if (!out) throw IoError(IoErrorCode::WriteFailed, path.string());
}

void write_json(const json& j, const fs::path& path) { write_text(j.dump(2) + "\n", path); }

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

Eigen::Vector3d vec3(const json& j) { return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()}; }

json vec_json(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }

}  // namespace

PipelineConfig config_from_json(const json& j, PipelineConfig c) {
  validate_against_schema(j, schema(SchemaId::PipelineConfig), "pipeline config");
  take(j, "seed", c.seed);
  if (auto it = j.find("mode"); it != j.end()) c.mode = LossMode::parse(it->get<std::string>());
  take(j, "post", c.post);
  take(j, "noise_sigma", c.noise_sigma);
  take(j, "jobs", c.jobs);
  if (auto p = j.find("paths"); p != j.end()) {
    auto path = [&](const char* key, fs::path& out) {
      if (auto it = p->find(key); it != p->end()) out = it->get<std::string>();
    };
    path("ax", c.paths.ax);
    path("sax", c.paths.sax);
    path("gt_transform", c.paths.gt_transform);
    path("ax_labels", c.paths.ax_labels);
    path("spec", c.paths.spec);
    path("out_dir", c.paths.out_dir);
  }
  if (auto w = j.find("weights"); w != j.end()) {
    take(*w, "alpha1", c.weights.alpha1);
    take(*w, "alpha2", c.weights.alpha2);
    take(*w, "w_seg", c.weights.w_seg);
    take(*w, "r", c.weights.r);
    take(*w, "tau", c.weights.tau);
    take(*w, "smooth", c.weights.smooth);
  }
  if (auto o = j.find("optim"); o != j.end()) {
    take(*o, "lr0", c.optim.lr0);
    take(*o, "plateau_factor", c.optim.plateau_factor);
    take(*o, "plateau_patience", c.optim.plateau_patience);
    take(*o, "lr_min", c.optim.lr_min);
    take(*o, "stop_patience", c.optim.stop_patience);
    take(*o, "epoch_steps", c.optim.epoch_steps);
    take(*o, "max_steps", c.optim.max_steps);
    take(*o, "min_delta", c.optim.min_delta);
  }
  if (auto g = j.find("grid"); g != j.end()) {
    if (auto s = g->find("common_shape"); s != g->end())
      c.grid.common_shape = Shape((*s)[0].get<int>(), (*s)[1].get<int>(), (*s)[2].get<int>());
    take(*g, "iso_mm", c.grid.iso_mm);
    take(*g, "quantile", c.grid.quantile);
    take(*g, "sax_z_shift_mm", c.grid.sax_z_shift_mm);
  }
  c.optim.seed = c.seed;
  c.validate();
  return c;
}

json to_json(const PipelineConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["mode"] = c.mode.name();
  j["post"] = c.post;
  j["noise_sigma"] = c.noise_sigma;
  j["jobs"] = c.jobs;
  json paths = json::object();
  auto path = [&](const char* key, const fs::path& p) {
    if (!p.empty()) paths[key] = p.string();
  };
  path("ax", c.paths.ax);
  path("sax", c.paths.sax);
  path("gt_transform", c.paths.gt_transform);
  path("ax_labels", c.paths.ax_labels);
  path("spec", c.paths.spec);
  path("out_dir", c.paths.out_dir);
  j["paths"] = paths;
  j["weights"] = {{"alpha1", c.weights.alpha1}, {"alpha2", c.weights.alpha2},
                  {"w_seg", c.weights.w_seg},   {"r", c.weights.r},
                  {"tau", c.weights.tau},       {"smooth", c.weights.smooth}};
  j["optim"] = {{"lr0", c.optim.lr0},
                {"plateau_factor", c.optim.plateau_factor},
                {"plateau_patience", c.optim.plateau_patience},
                {"lr_min", c.optim.lr_min},
                {"stop_patience", c.optim.stop_patience},
                {"epoch_steps", c.optim.epoch_steps},
                {"max_steps", c.optim.max_steps},
                {"min_delta", c.optim.min_delta}};
  j["grid"] = {{"common_shape", {c.grid.common_shape[0], c.grid.common_shape[1], c.grid.common_shape[2]}},
               {"iso_mm", c.grid.iso_mm},
               {"quantile", c.grid.quantile},
               {"sax_z_shift_mm", c.grid.sax_z_shift_mm}};
  return j;
}

PhantomSpec spec_from_json(const json& j, PhantomSpec s) {
  validate_against_schema(j, schema(SchemaId::PhantomSpec), "phantom spec");
  auto ellipsoid = [&](const char* key, Ellipsoid& e) {
    if (auto it = j.find(key); it != j.end()) {
      if (auto c = it->find("center"); c != it->end()) e.center = vec3(*c);
      if (auto a = it->find("semi_axes"); a != it->end()) e.semi_axes = vec3(*a);
    }
  };
  ellipsoid("lv", s.lv);
  ellipsoid("myo", s.myo);
  ellipsoid("rv", s.rv);
  take(j, "base_z", s.base_z);
  if (auto l = j.find("levels"); l != j.end()) {
    take(*l, "background", s.levels.background);
    take(*l, "lv", s.levels.lv);
    take(*l, "myo", s.levels.myo);
    take(*l, "rv", s.levels.rv);
  }
  take(j, "sigma_mm", s.sigma_mm);
  if (auto p = j.find("pose"); p != j.end()) s.pose = matrix_from_json(*p);
  take(j, "logit_scale", s.logit_scale);
  take(j, "intensity_width", s.intensity_width);
  take(j, "prior_width_mm", s.prior_width_mm);
  s.validate();
  if (!is_rigid(s.pose, 1e-6)) throw std::invalid_argument("phantom spec: pose must be rigid");
  return s;
}

json to_json(const PhantomSpec& s) {
  auto ellipsoid = [](const Ellipsoid& e) {
    return json{{"center", vec_json(e.center)}, {"semi_axes", vec_json(e.semi_axes)}};
  };
  return {{"lv", ellipsoid(s.lv)},
          {"myo", ellipsoid(s.myo)},
          {"rv", ellipsoid(s.rv)},
          {"base_z", s.base_z},
          {"levels",
           {{"background", s.levels.background},
            {"lv", s.levels.lv},
            {"myo", s.levels.myo},
            {"rv", s.levels.rv}}},
          {"sigma_mm", s.sigma_mm},
          {"pose", matrix_json(s.pose)},
          {"logit_scale", s.logit_scale},
          {"intensity_width", s.intensity_width},
          {"prior_width_mm", s.prior_width_mm}};
}

json matrix_json(const Affine& m) {
  json a = json::array();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) a.push_back(m(r, c));
  return a;
}

Affine matrix_from_json(const json& j) {
  if (!j.is_array() || j.size() != 16)
    throw std::invalid_argument("a matrix needs 16 row-major numbers");
  Affine m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = j[std::size_t(4 * r + c)].get<double>();
  if (!m.allFinite()) throw std::invalid_argument("matrix entries must be finite");
  if ((m.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("matrix bottom row must be (0, 0, 0, 1)");
  return m;
}

json transform_json(const Affine& m) { return {{"matrix", matrix_json(m)}}; }

json transform_json(const RigidParams& p) {
  const AffineSet s = euler_to_affine(p);
  return {{"matrix", matrix_json(s.forward)},
          {"inverse", matrix_json(s.inverse)},
          {"task_matrix", matrix_json(s.task)},
          {"task_inverse", matrix_json(s.task_inverse)},
          {"params",
           {{"phi", p.phi},
            {"theta", p.theta},
            {"psi", p.psi},
            {"tx", p.t[0]},
            {"ty", p.t[1]},
            {"tz", p.t[2]},
            {"txt", p.t_task[0]},
            {"tyt", p.t_task[1]},
            {"tzt", p.t_task[2]}}}};
}

Affine transform_from_json(const json& j) {
  validate_against_schema(j, schema(SchemaId::Transform), "transform");
  return matrix_from_json(j.at("matrix"));
}

RigidParams params_from_json(const json& j) {
  validate_against_schema(j, schema(SchemaId::Transform), "transform");
  if (auto p = j.find("params"); p != j.end()) {
    RigidParams r;
    take(*p, "phi", r.phi);
    take(*p, "theta", r.theta);
    take(*p, "psi", r.psi);
    take(*p, "tx", r.t[0]);
    take(*p, "ty", r.t[1]);
    take(*p, "tz", r.t[2]);
    r.t_task = r.t;
    take(*p, "txt", r.t_task[0]);
    take(*p, "tyt", r.t_task[1]);
    take(*p, "tzt", r.t_task[2]);
    return r;
  }
  const Affine m = matrix_from_json(j.at("matrix"));
  if (!is_rigid(m, 1e-6)) throw std::invalid_argument("transform: matrix is not rigid");
  RigidParams r = params_from_affine(m);
  r.t_task = r.t;
  return r;
}

json to_json(const MetricReport& r) {
  auto maybe = [](const std::optional<double>& v) -> json {
    if (v) return *v;
    return "excluded";
  };
  json classes = json::object();
  for (int c = 1; c <= kNumForeground; ++c) {
    const ClassMetrics& m = r.at(c);
    classes[class_name(c)] = {{"dice", maybe(m.dice)},
                              {"hausdorff_mm", maybe(m.hausdorff_mm)},
                              {"volume_pred_ml", m.volume_pred_ml},
                              {"volume_truth_ml", m.volume_truth_ml},
                              {"volume_diff_ml", m.volume_diff_ml}};
  }
  return {{"case", r.case_id}, {"classes", classes}};
}

json to_json(const LossReport& r) {
  json j = {{"cycle_fwd", r.cycle_fwd},       {"cycle_bwd", r.cycle_bwd},
            {"cycle", r.cycle},               {"focus_exact", r.focus_exact},
            {"focus_smooth", r.focus_smooth}, {"total", r.total},
            {"alpha1", r.alpha1},             {"alpha2", r.alpha2},
            {"reduction", r.reduction},       {"mode", r.mode}};
  if (r.seg_ce) j["seg_ce"] = *r.seg_ce;
  if (r.seg_sdl) j["seg_sdl"] = *r.seg_sdl;
  if (r.seg_total) j["seg_total"] = *r.seg_total;
  return j;
}

std::string trace_csv(const RegistrationTrace& trace) {
  std::ostringstream os;
  os << "step,lr,loss_total,loss_cycle_fwd,loss_cycle_bwd,loss_focus_exact,loss_focus_smooth,"
        "phi,theta,psi,tx,ty,tz,txt,tyt,tzt\n";
  for (const TraceRow& r : trace.rows) {
    os << r.step << ',' << fmt(r.lr) << ',' << fmt(r.loss.total) << ',' << fmt(r.loss.cycle_fwd)
       << ',' << fmt(r.loss.cycle_bwd) << ',' << fmt(r.loss.focus_exact) << ','
       << fmt(r.loss.focus_smooth);
    const ParamVector p = r.params.to_vector();
    for (int k = 0; k < kNumParams; ++k) os << ',' << fmt(p[k]);
    os << '\n';
  }
  return os.str();
}

std::string metrics_csv(const std::vector<MetricReport>& reports) {
  std::ostringstream os;
  os << "case,class,dice,hausdorff_mm,volume_pred_ml,volume_truth_ml,volume_diff_ml\n";
  auto maybe = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string("excluded"); };
  for (const auto& r : reports)
    for (int c = 1; c <= kNumForeground; ++c) {
      const ClassMetrics& m = r.at(c);
      os << r.case_id << ',' << class_name(c) << ',' << maybe(m.dice) << ','
         << maybe(m.hausdorff_mm) << ',' << fmt(m.volume_pred_ml) << ','
         << fmt(m.volume_truth_ml) << ',' << fmt(m.volume_diff_ml) << '\n';
    }
  return os.str();
}

}  // namespace rigidda
