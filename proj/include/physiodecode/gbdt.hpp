#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "physiodecode/dataset.hpp"
#include "physiodecode/matrix.hpp"

namespace physiodecode::gbdt {

enum class Growth { DepthWise, LeafWise };

// Auto picks exact sorted-feature splits for DepthWise and 255-bin quantile
// histograms for LeafWise.
enum class SplitMode { Auto, Exact, Histogram };

std::string_view growth_name(Growth g);
Growth parse_growth(std::string_view text);

// Which knobs a growth strategy honours:
//   DepthWise: max_depth, min_child_weight, gamma, max_delta_step
//   LeafWise : num_leaves, max_depth (<= 0 means unlimited), min_child_samples
// Both use learning_rate, subsample, colsample, lambda_l1 and lambda_l2.
// LeafWise uses a fixed 1e-3 minimum child hessian.
struct GbdtConfig {
  int n_estimators = 100;
  double learning_rate = 0.05;
  int max_depth = 6;
  double subsample = 1.0;
  double colsample = 1.0;
  double min_child_weight = 1.0;
  double gamma = 0.0;
  int max_delta_step = 0;
  int num_leaves = 31;
  int min_child_samples = 20;
  double lambda_l1 = 0.0;
  double lambda_l2 = 1.0;
  Growth growth = Growth::DepthWise;
  SplitMode split_mode = SplitMode::Auto;
  int max_bins = 255;
  std::uint64_t seed = 0;

  bool uses_histogram() const noexcept {
    return split_mode == SplitMode::Histogram ||
           (split_mode == SplitMode::Auto && growth == Growth::LeafWise);
  }
};

inline constexpr int kLeaf = -1;

struct TreeNode {
  int split_feature = kLeaf;
  double threshold = 0.0;  // x < threshold goes left
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;  // margin contribution (learning rate applied)
  double cover = 0.0;       // sum of weighted hessians reaching the node
  int n_samples = 0;
  double gain = 0.0;  // split gain for internal nodes

  bool is_leaf() const noexcept { return split_feature == kLeaf; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::size_t leaf_index(std::span<const double> x) const noexcept;
  double predict(std::span<const double> x) const noexcept { return nodes[leaf_index(x)].leaf_value; }
  int depth() const;
  std::size_t n_leaves() const;
};

struct GbdtModel {
  int n_classes = kNumClasses;
  GbdtConfig config;
  std::vector<double> base_score;            // per class
  std::vector<std::vector<Tree>> trees;      // [round][class]
  std::vector<std::string> feature_names;

  std::size_t n_rounds() const noexcept { return trees.size(); }
  std::size_t n_features() const noexcept { return feature_names.size(); }
};

// Balanced weights w_c = N / (C * n_c).
struct ClassWeights {
  std::vector<double> weight;
  std::vector<std::size_t> count;
  std::size_t total = 0;

  double operator[](std::size_t c) const { return weight.at(c); }
};

// Throws EmptyClass when any count is zero.
ClassWeights class_weights(std::span<const std::size_t> counts);
ClassWeights class_weights(std::span<const BehaviorClass> labels);
std::vector<double> sample_weights(std::span<const BehaviorClass> labels, const ClassWeights& w);

// Softmax cross-entropy boosting. Throws DegenerateData when every label is
// the same, FeatureMismatch on shape errors, NonFiniteSample on NaN/Inf.
GbdtModel train(const Matrix& x, std::span<const int> labels, std::span<const double> weights,
                const GbdtConfig& cfg, std::vector<std::string> feature_names,
                int n_classes = kNumClasses);
GbdtModel train(const Matrix& x, std::span<const BehaviorClass> labels,
                std::span<const double> weights, const GbdtConfig& cfg,
                std::vector<std::string> feature_names);

// Raw per-class margins: base_score + summed leaf values of the first
// `max_rounds` rounds (all rounds when negative).
std::vector<double> predict_margin(const GbdtModel& model, std::span<const double> row,
                                   long max_rounds = -1);
Matrix predict_margin(const GbdtModel& model, const Matrix& x, long max_rounds = -1);

// Row-wise softmax of the margins. Throws FeatureMismatch on column count.
Matrix predict_proba(const GbdtModel& model, const Matrix& x, long max_rounds = -1);

// Numerically stable in-place softmax.
void softmax(std::span<double> v);

// Weighted mean cross-entropy of probabilities against labels.
double log_loss(const Matrix& proba, std::span<const int> labels, std::span<const double> weights);

// JSON schema v1:
// {schema_version, growth, config, n_classes, base_score[], trees[[...]], feature_names[]}
inline constexpr int kModelSchemaVersion = 1;
std::string to_json(const GbdtModel& model, int indent = -1);
// Throws SchemaVersionMismatch on malformed documents or version mismatch.
GbdtModel from_json(std::string_view text);

// Hyperparameters alone, as a compact JSON object.
std::string config_to_json(const GbdtConfig& cfg);
GbdtConfig config_from_json(std::string_view text);

}  // namespace physiodecode::gbdt
