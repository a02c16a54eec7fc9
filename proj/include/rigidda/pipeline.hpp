// Command implementations behind the CLI: phantom pair generation,
// registration, resampling, evaluation, loss inspection, apply and the
// end-to-end run. Each writes its artifacts atomically: on failure nothing is
// left in the output directory.
#pragma once

#include "rigidda/apply.hpp"
#include "rigidda/config.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace rigidda {

// File names of a pair directory.
struct PairFiles {
  std::filesystem::path ax, sax, ax_labels, sax_labels, gt, spec;
  static PairFiles in(const std::filesystem::path& dir);
};

// A phantom in world space plus the two acquisition geometries.
struct PhantomCase {
  PhantomSpec spec;
  PairGeometry geometry;
  Affine rel = Affine::Identity();  // J shows the phantom at spec.pose * rel
};

// Axial stack (1.3 x 1.3 x 6 mm) and an oblique short-axis stack
// (1.35 x 1.35 x 8 mm) through the same heart, preprocessed onto `grid`.
PhantomCase demo_case(const GridSpec& grid = {}, std::uint64_t seed = 0);

// Like the demo, but the short-axis stack is centred towards the base so the
// apex falls outside its preprocessed grid.
PhantomCase apex_cropping_case(std::uint64_t seed, const GridSpec& grid = {});

PhantomPair render_case(const PhantomCase& c, double noise_sigma, std::uint64_t seed);

// Writes I.nii, J.nii, I_labels.nii, J_labels.nii, gtM.json and spec.json.
void write_pair(const PhantomPair& pair, const PhantomSpec& spec,
                const std::filesystem::path& out_dir);

struct LoadedPair {
  Volume ax, sax;
  std::optional<LabelVolume> ax_labels;
  GroundTruth gt;
  PhantomSpec spec;
};

// Missing gtM.json falls back to the header geometry: both stacks share one
// world frame, so M_hat = normalized_from_world(I) * world_from_normalized(J).
LoadedPair load_pair(const PairFiles& files);

// Analytic segmenter on J's grid.
AnalyticSegmenter make_task(const LoadedPair& pair);

RegistrationResult run_register(const LoadedPair& pair, const PipelineConfig& cfg);

struct End2EndResult {
  RegistrationResult registration;
  RigidParams params;  // as applied (t_t = t outside focus modes)
  MetricReport report;
};

// register -> apply -> eval. Artifacts in out_dir: trace.csv, transform.json,
// pred_labels.nii, metrics.json, metrics.csv, config.json. Errors carry the
// failing stage in their message.
End2EndResult cmd_end2end(const std::filesystem::path& pair_dir, const PipelineConfig& cfg,
                          const std::filesystem::path& out_dir);

// Output files written under temporary names next to their final location
// and renamed in place only by commit(). Without a commit the temporaries, and
// any directories created for them, are removed.
class AtomicOutputs {
 public:
  AtomicOutputs() = default;
  ~AtomicOutputs();
  AtomicOutputs(const AtomicOutputs&) = delete;
  AtomicOutputs& operator=(const AtomicOutputs&) = delete;

  // Temporary path to write `final_path` to. Keeps the extension, so volume
  // writers pick the same format; a .json/.raw volume stages both files.
  std::filesystem::path stage(const std::filesystem::path& final_path);
  void commit();

 private:
  struct Entry {
    std::filesystem::path temp, final;
  };
  std::vector<Entry> entries_;
  std::vector<std::filesystem::path> created_dirs_;
  bool committed_ = false;
};

// Runs f, prefixing any error with "[stage] " while keeping its type.
template <typename F>
auto run_stage(const char* stage, F&& f) -> decltype(f());

}  // namespace rigidda

#include "rigidda/detail/run_stage.hpp"
