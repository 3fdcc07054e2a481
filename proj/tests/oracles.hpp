#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Each oracle is written as the most direct loop over its definition, with
// no sharing of code paths with the library.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "physiodecode/gbdt.hpp"
#include "physiodecode/rng.hpp"
#include "physiodecode/shap.hpp"

namespace oracle {

using physiodecode::Rng;
using physiodecode::gbdt::Tree;
using physiodecode::gbdt::TreeNode;

// Random binary tree over `n_features` features in [0, 1). Leaf covers are
// drawn, internal covers are the sum of their children.
inline Tree random_tree(Rng& rng, int max_depth, int n_features) {
  Tree tree;
  struct Builder {
    Rng& rng;
    Tree& tree;
    int max_depth;
    int n_features;

    int grow(int depth) {
      const int id = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      const bool leaf = depth >= max_depth || (depth > 0 && rng.uniform() < 0.25);
      if (leaf) {
        tree.nodes[id].leaf_value = rng.normal();
        tree.nodes[id].cover = rng.uniform(0.5, 5.0);
        return id;
      }
      const int feature = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_features)));
      const double threshold = rng.uniform(0.1, 0.9);
      const int l = grow(depth + 1);
      const int r = grow(depth + 1);
      auto& n = tree.nodes[id];
      n.split_feature = feature;
      n.threshold = threshold;
      n.left = l;
      n.right = r;
      n.cover = tree.nodes[l].cover + tree.nodes[r].cover;
      return id;
    }
  };
  Builder{rng, tree, max_depth, n_features}.grow(0);
  return tree;
}

// Expected tree output when the features in `known` (bit mask) follow x and
// every other split is averaged by child cover.
inline double conditional_value(const Tree& tree, std::span<const double> x, unsigned known,
                                std::size_t node = 0) {
  const TreeNode& n = tree.nodes[node];
  if (n.is_leaf()) return n.leaf_value;
  const auto l = static_cast<std::size_t>(n.left);
  const auto r = static_cast<std::size_t>(n.right);
  if (known & (1u << n.split_feature))
    return conditional_value(tree, x, known, x[static_cast<std::size_t>(n.split_feature)] < n.threshold ? l : r);
  return (tree.nodes[l].cover * conditional_value(tree, x, known, l) +
          tree.nodes[r].cover * conditional_value(tree, x, known, r)) /
         n.cover;
}

// Shapley values by enumerating every coalition of the p players.
inline std::vector<double> brute_force_shap(const Tree& tree, std::span<const double> x, int p) {
  const unsigned subsets = 1u << p;
  std::vector<double> value(subsets);
  for (unsigned s = 0; s < subsets; ++s) value[s] = conditional_value(tree, x, s);
  std::vector<double> fact(static_cast<std::size_t>(p) + 1, 1.0);
  for (int i = 1; i <= p; ++i) fact[static_cast<std::size_t>(i)] = fact[static_cast<std::size_t>(i - 1)] * i;
  std::vector<double> phi(static_cast<std::size_t>(p), 0.0);
  for (int i = 0; i < p; ++i) {
    for (unsigned s = 0; s < subsets; ++s) {
      if (s & (1u << i)) continue;
      const int size = std::popcount(s);
      const double w = fact[static_cast<std::size_t>(size)] * fact[static_cast<std::size_t>(p - size - 1)] /
                       fact[static_cast<std::size_t>(p)];
      phi[static_cast<std::size_t>(i)] += w * (value[s | (1u << i)] - value[s]);
    }
  }
  return phi;
}

// Mean over samples of the class-summed absolute attributions.
inline std::vector<double> importance_loop(const physiodecode::shapx::ShapMatrix& shap) {
  std::vector<double> out(shap.n_features, 0.0);
  for (std::size_t j = 0; j < shap.n_features; ++j) {
    double total = 0.0;
    for (std::size_t k = 0; k < shap.n_samples; ++k)
      for (std::size_t c = 0; c < shap.n_classes; ++c) total += std::abs(shap.at(k, c, j));
    out[j] = total / static_cast<double>(shap.n_samples);
  }
  return out;
}

inline std::vector<double> sinusoid(double freq_hz, double fs, std::size_t n, double amplitude = 1.0,
                                    double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / fs + phase);
  return x;
}

// RMS over [skip, n - skip).
inline double rms(std::span<const double> x, std::size_t skip = 0) {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = skip; i + skip < x.size(); ++i, ++count) acc += x[i] * x[i];
  return std::sqrt(acc / static_cast<double>(count));
}

// Amplitude of the freq_hz component of x over [skip, n - skip), by
// projection onto a quadrature pair; insensitive to slow transients.
inline double tone_amplitude(std::span<const double> x, double freq_hz, double fs, std::size_t skip = 0) {
  double re = 0.0, im = 0.0;
  std::size_t count = 0;
  for (std::size_t i = skip; i + skip < x.size(); ++i, ++count) {
    const double w = 2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / fs;
    re += x[i] * std::cos(w);
    im += x[i] * std::sin(w);
  }
  return 2.0 * std::hypot(re, im) / static_cast<double>(count);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace oracle
