#include "physiodecode/shap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "physiodecode/error.hpp"
#include "physiodecode/parallel.hpp"

namespace physiodecode::shapx {

namespace {

// Decision-path bookkeeping for TreeSHAP (Lundberg et al.). pweight of the
// i-th element is the permutation weight of subsets with i ones.
struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

void extend_path(PathElement* path, std::size_t depth, double zero_fraction, double one_fraction,
                 int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(depth) - 1; i >= 0; --i) {
    const double d = static_cast<double>(depth);
    path[i + 1].pweight += one_fraction * path[i].pweight * static_cast<double>(i + 1) / (d + 1.0);
    path[i].pweight = zero_fraction * path[i].pweight * (d - static_cast<double>(i)) / (d + 1.0);
  }
}

void unwind_path(PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d = static_cast<double>(depth);
  double next_one_portion = path[depth].pweight;
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(depth) - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight = next_one_portion * (d + 1.0) / (static_cast<double>(i + 1) * one);
      next_one_portion = tmp - path[i].pweight * zero * (d - static_cast<double>(i)) / (d + 1.0);
    } else {
      path[i].pweight = path[i].pweight * (d + 1.0) / (zero * (d - static_cast<double>(i)));
    }
  }
  for (std::size_t i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

double unwound_path_sum(const PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d = static_cast<double>(depth);
  double next_one_portion = path[depth].pweight;
  double total = 0.0;
  for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(depth) - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double tmp = next_one_portion * (d + 1.0) / (static_cast<double>(i + 1) * one);
      total += tmp;
      next_one_portion = path[i].pweight - tmp * zero * ((d - static_cast<double>(i)) / (d + 1.0));
    } else if (zero != 0.0) {
      total += (path[i].pweight / zero) / ((d - static_cast<double>(i)) / (d + 1.0));
    }
  }
  return total;
}

void recurse(const gbdt::Tree& tree, std::span<const double> x, std::span<double> phi,
             std::size_t node_index, std::size_t depth, PathElement* parent_path,
             double parent_zero_fraction, double parent_one_fraction, int parent_feature) {
  const auto& node = tree.nodes[node_index];
  PathElement* path = parent_path + depth + 1;
  std::copy(parent_path, parent_path + depth + 1, path);
  extend_path(path, depth, parent_zero_fraction, parent_one_fraction, parent_feature);

  if (node.is_leaf()) {
    for (std::size_t i = 1; i <= depth; ++i) {
      const double w = unwound_path_sum(path, depth, i);
      const auto& el = path[i];
      phi[static_cast<std::size_t>(el.feature)] += w * (el.one_fraction - el.zero_fraction) * node.leaf_value;
    }
    return;
  }

  const auto feature = static_cast<std::size_t>(node.split_feature);
  const auto hot = static_cast<std::size_t>(x[feature] < node.threshold ? node.left : node.right);
  const auto cold = static_cast<std::size_t>(hot == static_cast<std::size_t>(node.left) ? node.right : node.left);
  const double hot_zero = tree.nodes[hot].cover / node.cover;
  const double cold_zero = tree.nodes[cold].cover / node.cover;
  double incoming_zero = 1.0;
  double incoming_one = 1.0;

  // A feature already on the path is unwound and re-extended with the
  // combined fractions.
  std::size_t path_index = 0;
  for (; path_index <= depth; ++path_index)
    if (path[path_index].feature == node.split_feature) break;
  if (path_index != depth + 1) {
    incoming_zero = path[path_index].zero_fraction;
    incoming_one = path[path_index].one_fraction;
    unwind_path(path, depth, path_index);
    depth -= 1;
  }

  recurse(tree, x, phi, hot, depth + 1, path, hot_zero * incoming_zero, incoming_one,
          node.split_feature);
  recurse(tree, x, phi, cold, depth + 1, path, cold_zero * incoming_zero, 0.0, node.split_feature);
}

double subtree_mean(const gbdt::Tree& tree, std::size_t i) {
  const auto& n = tree.nodes[i];
  if (n.is_leaf()) return n.leaf_value;
  const auto& l = tree.nodes[static_cast<std::size_t>(n.left)];
  const auto& r = tree.nodes[static_cast<std::size_t>(n.right)];
  return (l.cover * subtree_mean(tree, static_cast<std::size_t>(n.left)) +
          r.cover * subtree_mean(tree, static_cast<std::size_t>(n.right))) /
         (l.cover + r.cover);
}

}  // namespace

double expected_value(const gbdt::Tree& tree) { return subtree_mean(tree, 0); }

void tree_shap(const gbdt::Tree& tree, std::span<const double> x, std::span<double> phi) {
  const auto max_depth = static_cast<std::size_t>(tree.depth()) + 2;
  std::vector<PathElement> storage(max_depth * (max_depth + 1) / 2);
  recurse(tree, x, phi, 0, 0, storage.data(), 1.0, 1.0, -1);
}

ShapMatrix tree_shap(const gbdt::GbdtModel& model, const Matrix& x, unsigned threads) {
  if (x.cols != model.n_features())
    throw Error(ErrorKind::FeatureMismatch, "SHAP input has " + std::to_string(x.cols) +
                                                " columns, model expects " + std::to_string(model.n_features()));
  const auto classes = static_cast<std::size_t>(model.n_classes);
  ShapMatrix out(x.rows, classes, x.cols);
  for (std::size_t c = 0; c < classes; ++c) {
    double base = model.base_score[c];
    for (const auto& round : model.trees) base += expected_value(round[c]);
    out.base_values[c] = base;
  }
  parallel_for(
      x.rows,
      [&](std::size_t k) {
        for (std::size_t c = 0; c < classes; ++c) {
          std::span<double> phi(out.phi.data() + (k * classes + c) * x.cols, x.cols);
          for (const auto& round : model.trees) tree_shap(round[c], x.row(k), phi);
        }
      },
      threads);
  return out;
}

std::vector<double> aggregate_importance(const ShapMatrix& shap) {
  std::vector<double> importance(shap.n_features, 0.0);
  if (shap.n_samples == 0) return importance;
  for (std::size_t k = 0; k < shap.n_samples; ++k)
    for (std::size_t c = 0; c < shap.n_classes; ++c) {
      const auto row = shap.row(k, c);
      for (std::size_t j = 0; j < shap.n_features; ++j) importance[j] += std::abs(row[j]);
    }
  for (auto& v : importance) v /= static_cast<double>(shap.n_samples);
  return importance;
}

ImportanceVector rank_importance(std::vector<double> importance,
                                 std::vector<std::string> feature_names, std::size_t k) {
  if (importance.size() != feature_names.size())
    throw Error(ErrorKind::FeatureMismatch, "importance and name vectors differ in length");
  ImportanceVector iv;
  iv.importance = std::move(importance);
  iv.feature_names = std::move(feature_names);
  iv.ranking.resize(iv.importance.size());
  std::iota(iv.ranking.begin(), iv.ranking.end(), std::size_t{0});
  std::sort(iv.ranking.begin(), iv.ranking.end(), [&](std::size_t a, std::size_t b) {
    if (iv.importance[a] != iv.importance[b]) return iv.importance[a] > iv.importance[b];
    return iv.feature_names[a] < iv.feature_names[b];
  });
  iv.k = k;
  iv.elite.assign(iv.ranking.begin(),
                  iv.ranking.begin() + static_cast<std::ptrdiff_t>(std::min(k, iv.ranking.size())));
  return iv;
}

std::vector<std::string> select_elite(const ImportanceVector& importance, std::size_t k) {
  if (k == 0) throw Error(ErrorKind::ConfigInvalid, "elite size must be >= 1");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < std::min(k, importance.ranking.size()); ++i)
    names.push_back(importance.feature_names[importance.ranking[i]]);
  return names;
}

ModalityShares modality_decomposition(const ImportanceVector& importance) {
  std::array<double, 3> sums{};
  for (std::size_t j = 0; j < importance.importance.size(); ++j)
    sums[static_cast<std::size_t>(features::modality_of_feature(importance.feature_names[j]))] +=
        importance.importance[j];
  const double total = sums[0] + sums[1] + sums[2];
  if (total <= 0.0) return {};
  return {sums[0] / total, sums[1] / total, sums[2] / total};
}

gbdt::GbdtConfig selector_config(std::uint64_t seed) {
  gbdt::GbdtConfig cfg;
  cfg.growth = gbdt::Growth::DepthWise;
  cfg.n_estimators = 300;
  cfg.max_depth = 6;
  cfg.learning_rate = 0.05;
  cfg.seed = seed;
  return cfg;
}

SelectionResult select_features(const features::FeatureMatrix& train, std::size_t k,
                                const gbdt::GbdtConfig& selector_cfg) {
  const auto weights = gbdt::sample_weights(train.labels, gbdt::class_weights(train.labels));
  SelectionResult result;
  result.selector = gbdt::train(train.values, train.labels, weights, selector_cfg, train.registry.names());
  const ShapMatrix shap = tree_shap(result.selector, train.values);
  result.importance = rank_importance(aggregate_importance(shap), train.registry.names(), k);
  result.elite_names = select_elite(result.importance, k);
  return result;
}

void write_importance_csv(const std::filesystem::path& path, const ImportanceVector& iv) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot create " + path.string());
  out << "rank,feature,importance,modality\n";
  char buf[32];
  for (std::size_t r = 0; r < iv.ranking.size(); ++r) {
    const auto j = iv.ranking[r];
    std::snprintf(buf, sizeof buf, "%.17g", iv.importance[j]);
    out << r + 1 << ',' << iv.feature_names[j] << ',' << buf << ','
        << modality_name(features::modality_of_feature(iv.feature_names[j])) << '\n';
  }
}

void write_elite_list(const std::filesystem::path& path, std::span<const std::string> names) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot create " + path.string());
  for (const auto& n : names) out << n << '\n';
}

std::vector<std::string> read_elite_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingArtifact, "cannot open " + path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) names.push_back(line);
  return names;
}

}  // namespace physiodecode::shapx
