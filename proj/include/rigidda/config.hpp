// Pipeline configuration and the JSON forms of specs, transforms, reports and
// traces. Every JSON input is checked against its published schema (see
// docs/schemas) before use.
#pragma once

#include "rigidda/losses.hpp"
#include "rigidda/metrics.hpp"
#include "rigidda/optim.hpp"
#include "rigidda/phantom.hpp"
#include "rigidda/registration.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace rigidda {

struct GridSpec {
  Shape common_shape{64, 64, 64};
  double iso_mm = 1.5;
  double quantile = 0.999;
  double sax_z_shift_mm = -10.0;  // signed z extension of the short-axis grid
};

struct PipelinePaths {
  std::filesystem::path ax, sax, gt_transform, ax_labels, spec, out_dir;
};

struct PipelineConfig {
  PipelinePaths paths;
  LossWeights weights;
  OptimConfig optim;
  GridSpec grid;
  LossMode mode = LossMode::full();
  std::uint64_t seed = 0;
  bool post = true;
  double noise_sigma = 0.01;
  int jobs = 1;

  // Cross-field invariants the schema cannot express.
  void validate() const;
};

enum class SchemaId { PipelineConfig, PhantomSpec, Transform, MetricReport };
const nlohmann::json& schema(SchemaId id);

// Reads a JSON file; IoError on missing or unparsable files.
nlohmann::json read_json(const std::filesystem::path& path);
// Writes `j` with a trailing newline; IoError on failure.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

// Overrides `base` with the fields present in `j` after schema validation.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});
nlohmann::json to_json(const PipelineConfig& c);

PhantomSpec spec_from_json(const nlohmann::json& j, PhantomSpec base = {});
nlohmann::json to_json(const PhantomSpec& s);

nlohmann::json matrix_json(const Affine& m);
Affine matrix_from_json(const nlohmann::json& j);

// {"matrix": M} for a ground-truth transform.
nlohmann::json transform_json(const Affine& m);
// Full dump of a registration result: M, M^-1, M_t, M_t^-1 and the params.
nlohmann::json transform_json(const RigidParams& p);
Affine transform_from_json(const nlohmann::json& j);
RigidParams params_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MetricReport& r);
nlohmann::json to_json(const LossReport& r);

// step, lr, loss_total, loss_cycle_fwd, loss_cycle_bwd, loss_focus_exact,
// loss_focus_smooth, phi, theta, psi, tx, ty, tz, txt, tyt, tzt
std::string trace_csv(const RegistrationTrace& trace);
std::string metrics_csv(const std::vector<MetricReport>& reports);

}  // namespace rigidda
