#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "physiodecode/dataset.hpp"
#include "physiodecode/dsp.hpp"
#include "physiodecode/matrix.hpp"

namespace physiodecode::features {

inline constexpr double kRatioEpsilon = 1e-12;

struct Band {
  std::string name;
  double lo_hz;
  double hi_hz;
};

// Frequency bands per modality. The feature-name suffix is derived from the
// band name ("alpha" -> "alpha_power", EMG "low" -> "band_low").
struct BandTable {
  std::vector<Band> eeg = {{"delta", 0.5, 4.0},
                           {"theta", 4.0, 8.0},
                           {"alpha", 8.0, 13.0},
                           {"beta", 13.0, 30.0},
                           {"gamma", 30.0, 50.0}};
  std::vector<Band> emg = {{"low", 20.0, 60.0}, {"mid", 60.0, 100.0}, {"high", 100.0, 240.0}};
  std::vector<Band> gsr = {{"phasic", 0.5, 5.0}, {"noise", 5.0, 35.0}};
};

// Channels (relative to the EMG range) forming each side of the asymmetry index.
struct EmgSides {
  std::vector<std::size_t> left = {0, 1};
  std::vector<std::size_t> right = {2, 3};
};

// Ordered, named feature columns. Modality membership is the name prefix,
// except GLOBAL_alpha_theta_ratio (EEG) and GLOBAL_emg_asymmetry (EMG).
class FeatureRegistry {
 public:
  FeatureRegistry() = default;
  explicit FeatureRegistry(std::vector<std::string> names);

  // Per EEG channel: 3 time + 5 band features; per EMG channel: 3 + 3; GSR:
  // 3 + 2; then the two global indices. 503 for the canonical layout.
  static FeatureRegistry build(const ModalityLayout& layout, const BandTable& bands = {});

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  Modality modality(std::size_t i) const { return modalities_.at(i); }
  std::ptrdiff_t index_of(std::string_view name) const;

 private:
  std::vector<std::string> names_;
  std::vector<Modality> modalities_;
};

Modality modality_of_feature(std::string_view name);

// Bit set over modalities, parsed from "eeg", "emg+gsr", "full", ...
struct ModalityMask {
  std::uint8_t bits = 0;

  static constexpr std::uint8_t kEeg = 1, kEmg = 2, kGsr = 4;
  static ModalityMask full() { return {kEeg | kEmg | kGsr}; }
  static ModalityMask parse(std::string_view text);

  bool contains(Modality m) const noexcept;
  bool empty() const noexcept { return bits == 0; }
  std::string to_string() const;  // "EEG+EMG", "EEG+EMG+GSR", ...
  bool operator==(const ModalityMask&) const = default;
};

// The seven canonical ablation masks: three singles, three pairs, full.
std::vector<ModalityMask> canonical_masks();

std::vector<std::size_t> columns_for(const FeatureRegistry& registry, ModalityMask mask);

struct FeatureMatrix {
  Matrix values;
  FeatureRegistry registry;
  std::vector<BehaviorClass> labels;
  std::vector<std::string> subject_ids;

  std::size_t rows() const noexcept { return values.rows; }
  std::size_t cols() const noexcept { return values.cols; }
};

FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const std::size_t> rows);
FeatureMatrix select_columns(const FeatureMatrix& m, std::span<const std::size_t> cols);
// Columns by name; throws FeatureMismatch for unknown names.
FeatureMatrix select_columns(const FeatureMatrix& m, std::span<const std::string> names);

// ---------------------------------------------------------------------------
// Scalar features

// Sum of |x[i+1] - x[i]|. Throws TooShort for fewer than 2 samples.
double line_length(std::span<const double> x);

struct TimeFeatures {
  double line_length = 0.0;
  double deriv_var = 0.0;       // population variance of first differences
  double max_abs_change = 0.0;  // max |x[i+1] - x[i]|
};

// Throws TooShort for fewer than 3 samples.
TimeFeatures time_features(std::span<const double> x);

// (mean alpha + eps) / (mean theta + eps) over the given channels.
double alpha_theta_ratio(std::span<const double> alpha, std::span<const double> theta);

// (P_left - P_right) / (P_left + P_right + eps), where P_side sums the
// per-channel total EMG power over that side's channels.
double emg_asymmetry(std::span<const double> channel_power, const EmgSides& sides = {});

// ---------------------------------------------------------------------------

struct ExtractorConfig {
  dsp::WelchConfig welch;
  BandTable bands;
  EmgSides emg_sides;
};

// Per-epoch feature extraction against a fixed layout. The epoch must already
// be preprocessed. Stateless after construction, so one extractor may be
// shared across threads.
class FeatureExtractor {
 public:
  FeatureExtractor(ModalityLayout layout, ExtractorConfig cfg = {});

  const FeatureRegistry& registry() const noexcept { return registry_; }
  const ModalityLayout& layout() const noexcept { return layout_; }

  // Throws LayoutMismatch if the epoch does not match the layout.
  std::vector<double> extract(const Epoch& epoch) const;
  void extract_into(const Epoch& epoch, std::span<double> out) const;

  // Rows in input order; bitwise identical to calling extract() per epoch.
  FeatureMatrix extract_batch(std::span<const Epoch> epochs, unsigned threads = 0) const;

 private:
  ModalityLayout layout_;
  ExtractorConfig cfg_;
  FeatureRegistry registry_;
};

// ---------------------------------------------------------------------------
// Normalization

inline constexpr double kConstantStd = 1e-12;

struct ColumnStats {
  std::vector<double> mean;
  std::vector<double> std;
};

struct NormStats {
  std::vector<std::string> feature_names;
  ColumnStats global;
  // Filled only for subject-aware normalization.
  std::map<std::string, ColumnStats> by_subject;

  bool per_subject() const noexcept { return !by_subject.empty(); }
};

// Population mean/std per column over the given rows (all rows when empty).
NormStats fit_norm(const FeatureMatrix& m, bool per_subject = false,
                   std::span<const std::size_t> rows = {});

// z-score with the stored statistics; constant columns map to 0. Subjects
// missing from by_subject fall back to the global statistics. Throws
// StatsDimensionMismatch when the column names differ.
FeatureMatrix apply_norm(const FeatureMatrix& m, const NormStats& stats);

// ---------------------------------------------------------------------------
// File formats

// Header: registry names then label,subject_id. Values use %.17g.
void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m);
FeatureMatrix read_feature_csv(const std::filesystem::path& path);

// {"schema_version": 1, "features": {name: {"mean", "std"}}, "by_subject": {...}}
std::string norm_stats_to_json(const NormStats& stats, std::string_view config_hash = {});
NormStats norm_stats_from_json(std::string_view text);

}  // namespace physiodecode::features
