#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "physiodecode/features.hpp"
#include "physiodecode/gbdt.hpp"
#include "physiodecode/matrix.hpp"

namespace physiodecode::shapx {

// phi[(k * n_classes + c) * n_features + j]: attribution of feature j to the
// class-c margin of sample k.
struct ShapMatrix {
  std::size_t n_samples = 0;
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  std::vector<double> phi;
  std::vector<double> base_values;  // per class: base_score + expected tree outputs

  ShapMatrix() = default;
  ShapMatrix(std::size_t samples, std::size_t classes, std::size_t features)
      : n_samples(samples), n_classes(classes), n_features(features),
        phi(samples * classes * features, 0.0), base_values(classes, 0.0) {}

  double& at(std::size_t k, std::size_t c, std::size_t j) noexcept {
    return phi[(k * n_classes + c) * n_features + j];
  }
  double at(std::size_t k, std::size_t c, std::size_t j) const noexcept {
    return phi[(k * n_classes + c) * n_features + j];
  }
  std::span<const double> row(std::size_t k, std::size_t c) const noexcept {
    return {phi.data() + (k * n_classes + c) * n_features, n_features};
  }
};

// Cover-weighted mean leaf value of a tree.
double expected_value(const gbdt::Tree& tree);

// Path-dependent TreeSHAP for one tree, accumulated into phi (size = n_features).
void tree_shap(const gbdt::Tree& tree, std::span<const double> x, std::span<double> phi);

// Exact path-dependent SHAP over every class's trees, on margins.
// Throws FeatureMismatch when column counts differ.
ShapMatrix tree_shap(const gbdt::GbdtModel& model, const Matrix& x, unsigned threads = 0);

// I_j = (1/N) sum_k sum_c |phi[k, c, j]|.
std::vector<double> aggregate_importance(const ShapMatrix& shap);

struct ImportanceVector {
  std::vector<std::string> feature_names;
  std::vector<double> importance;
  std::vector<std::size_t> ranking;  // feature indices, most important first
  std::vector<std::size_t> elite;    // first min(K, p) entries of ranking
  std::size_t k = 0;
};

// Ranks by importance descending, ties by ascending feature name, and keeps
// the top K.
ImportanceVector rank_importance(std::vector<double> importance,
                                 std::vector<std::string> feature_names, std::size_t k);
std::vector<std::string> select_elite(const ImportanceVector& importance, std::size_t k);

struct ModalityShares {
  double eeg = 0.0;
  double emg = 0.0;
  double gsr = 0.0;
};

// Importance mass grouped by feature modality, normalised to sum to one
// (all zero when total importance is zero).
ModalityShares modality_decomposition(const ImportanceVector& importance);

// Auxiliary depth-wise model used to score features before elite selection.
gbdt::GbdtConfig selector_config(std::uint64_t seed);

struct SelectionResult {
  ImportanceVector importance;
  std::vector<std::string> elite_names;
  gbdt::GbdtModel selector;
};

// Trains the selector on `train` (balanced class weights), explains the same
// rows and returns the ranked importance with the top-K names.
SelectionResult select_features(const features::FeatureMatrix& train, std::size_t k,
                                const gbdt::GbdtConfig& selector_cfg);

// Importance CSV: rank,feature,importance,modality
void write_importance_csv(const std::filesystem::path& path, const ImportanceVector& importance);
void write_elite_list(const std::filesystem::path& path, std::span<const std::string> names);
std::vector<std::string> read_elite_list(const std::filesystem::path& path);

}  // namespace physiodecode::shapx
