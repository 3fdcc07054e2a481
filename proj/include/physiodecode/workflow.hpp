#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "physiodecode/error.hpp"
#include "physiodecode/eval.hpp"
#include "physiodecode/features.hpp"
#include "physiodecode/pipeline.hpp"

namespace physiodecode::workflow {

// Artifact names inside a workdir.
namespace artifact {
inline constexpr const char* kEpochs = "epochs.epb";
inline constexpr const char* kEpochManifest = "epochs_manifest.csv";
inline constexpr const char* kFeatures = "features.csv";
inline constexpr const char* kSplit = "split.json";
inline constexpr const char* kNormStats = "norm_stats.json";
inline constexpr const char* kImportance = "importance.csv";
inline constexpr const char* kElite = "elite.txt";
inline constexpr const char* kTuned = "tuned.json";
inline constexpr const char* kEnsemble = "ensemble.json";
inline constexpr const char* kModelA = "model_a.json";
inline constexpr const char* kModelB = "model_b.json";
inline constexpr const char* kReport = "report";  // + .json / .csv / .txt
inline constexpr const char* kAblation = "ablation.csv";
inline constexpr const char* kExplain = "explain_importance.csv";
}  // namespace artifact

struct StageOptions {
  pipeline::RunConfig config;
  std::filesystem::path workdir;
  std::optional<std::filesystem::path> data;  // extract input (default: workdir epochs)
  eval::ReportFormat format = eval::ReportFormat::Json;
  std::optional<features::ModalityMask> mask;  // ablate: single mask instead of all seven
  bool resume = false;
  std::size_t top = 20;  // explain: rows printed
};

// Exclusive writer lock on a workdir, released on destruction.
class WorkdirLock {
 public:
  explicit WorkdirLock(const std::filesystem::path& workdir);
  ~WorkdirLock();
  WorkdirLock(const WorkdirLock&) = delete;
  WorkdirLock& operator=(const WorkdirLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Workdir from the flag, else PHYSIODECODE_WORKDIR, else ./physiodecode_work.
std::filesystem::path resolve_workdir(const std::optional<std::filesystem::path>& flag);

// Each stage reads prior artifacts from the workdir (MissingArtifact names the
// stage that produces a missing input), writes its own artifacts and a
// manifest_<stage>.json. Returns a short human-readable summary.
std::string run_synth(const StageOptions& opts);
std::string run_extract(const StageOptions& opts);
std::string run_select(const StageOptions& opts);
std::string run_tune(const StageOptions& opts);
std::string run_train(const StageOptions& opts);
std::string run_evaluate(const StageOptions& opts);
std::string run_ablate(const StageOptions& opts);
std::string run_explain(const StageOptions& opts);

// 0 success, 2 config error, 3 missing artifact, 4 data error.
int exit_code_for(ErrorKind kind);

}  // namespace physiodecode::workflow
