#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "physiodecode/dataset.hpp"
#include "physiodecode/dsp.hpp"
#include "physiodecode/ensemble.hpp"
#include "physiodecode/eval.hpp"
#include "physiodecode/features.hpp"
#include "physiodecode/gbdt.hpp"
#include "physiodecode/shap.hpp"
#include "physiodecode/tpe.hpp"

namespace physiodecode::pipeline {

enum class Preset { Full, Desk };

// Every knob of a run. Text form is one `key = value` per line; '#' starts a
// comment. Keys match the field names below (see RunConfig::set).
struct RunConfig {
  std::uint64_t seed = 0;
  Preset preset = Preset::Full;
  double test_fraction = 0.2;
  std::size_t elite_k = 250;
  int trials = 50;
  int folds = 5;
  bool per_subject_norm = false;
  double bad_channel_z = 6.0;
  double flat_eps = 1e-6;
  bool drop_bad_epochs = true;
  std::optional<double> fixed_alpha;  // tuned when empty
  bool joint_search = false;
  bool resample_folds = false;  // new fold assignment per trial
  int selector_rounds = 300;
  int selector_depth = 6;
  double selector_learning_rate = 0.05;
  // Split search for the selector and both members; auto means exact for
  // depth-wise growth and histograms for leaf-wise growth.
  gbdt::SplitMode split_mode = gbdt::SplitMode::Auto;
  int max_bins = 255;
  tpe::TpeConfig tpe;
  dsp::PreprocessConfig preprocess;
  features::ExtractorConfig extractor;
  // Synthetic data for the synth stage.
  std::size_t synth_per_class = 250;

  static RunConfig defaults(Preset preset = Preset::Full);

  // Throws ConfigInvalid for unknown keys or unparsable values.
  void set(std::string_view key, std::string_view value);
  // Throws ConfigInvalid on out-of-range values.
  void validate() const;
  // Canonical text form; the config hash is computed over it.
  std::string to_text() const;

  gbdt::GbdtConfig selector() const;
  gbdt::GbdtConfig base_member_a() const;
  gbdt::GbdtConfig base_member_b() const;
  tpe::SearchSpace space_a() const;
  tpe::SearchSpace space_b() const;
};

RunConfig parse_config_text(std::string_view text, RunConfig base = {});
RunConfig load_config_file(const std::filesystem::path& path, RunConfig base = {});

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string config_hash(const RunConfig& cfg);
std::string file_hash(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Stages

struct ExtractResult {
  features::FeatureMatrix features;
  std::vector<std::size_t> kept;     // indices of epochs that produced rows
  std::vector<std::size_t> dropped;  // epochs rejected for bad channels
};

// Preprocess, screen and featurise every epoch (rows in input order).
ExtractResult extract_features(std::span<const Epoch> epochs, const ModalityLayout& layout,
                               const RunConfig& cfg);

struct PreparedData {
  DatasetSplit split;
  features::NormStats norm;
  features::FeatureMatrix train;  // normalised
  features::FeatureMatrix test;   // normalised with the training statistics
};

// Stratified split, then normalisation fitted on the training rows only.
PreparedData prepare(const features::FeatureMatrix& all, const RunConfig& cfg);
PreparedData prepare(const features::FeatureMatrix& all, const DatasetSplit& split,
                     const RunConfig& cfg);

struct TunedConfig {
  gbdt::GbdtConfig member_a;
  gbdt::GbdtConfig member_b;
  double alpha = ensemble::kReferenceAlpha;
  double cv_score_a = 0.0;
  double cv_score_b = 0.0;
  double cv_score_blend = 0.0;
};

// Journals are written as study_a.jsonl, study_b.jsonl and study_alpha.jsonl
// (or study_joint.jsonl) under journal_dir. With resume, existing journals
// are replayed and only the missing trials run.
TunedConfig tune(const features::FeatureMatrix& train, const RunConfig& cfg,
                 const std::optional<std::filesystem::path>& journal_dir = std::nullopt,
                 bool resume = false);

ensemble::EnsembleModel train_ensemble(const features::FeatureMatrix& train, const TunedConfig& tuned);

eval::EvalReport evaluate_ensemble(const ensemble::EnsembleModel& model,
                                   const features::FeatureMatrix& test);

struct RunResult {
  PreparedData data;
  shapx::SelectionResult selection;
  TunedConfig tuned;
  ensemble::EnsembleModel model;
  eval::EvalReport report;
};

// split -> normalise -> select -> tune -> train -> evaluate.
RunResult run(const features::FeatureMatrix& all, const RunConfig& cfg);

// Trains and evaluates with fixed member configs on the columns allowed by
// `mask`; selection is rerun on the restricted training rows.
RunResult run_fixed(const features::FeatureMatrix& all, const RunConfig& cfg,
                    const TunedConfig& tuned, features::ModalityMask mask);

struct AblationRow {
  features::ModalityMask mask;
  eval::EvalReport report;
};

// One report per mask. Throws EmptyMask for an empty mask.
std::vector<AblationRow> run_ablation(const features::FeatureMatrix& all,
                                      std::span<const features::ModalityMask> masks,
                                      const RunConfig& cfg, const TunedConfig& tuned);

// mask,accuracy,macro_f1,gap_vs_full (gap = full accuracy - mask accuracy).
std::string ablation_csv(std::span<const AblationRow> rows);

// Tuned member configs and alpha as JSON.
std::string tuned_to_json(const TunedConfig& tuned, std::string_view config_hash = {});
TunedConfig tuned_from_json(std::string_view text);

}  // namespace physiodecode::pipeline
