#include "physiodecode/gbdt.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "physiodecode/error.hpp"
#include "physiodecode/parallel.hpp"
#include "physiodecode/rng.hpp"

namespace physiodecode::gbdt {

namespace {

constexpr double kMinHessian = 1e-16;
constexpr double kMinGain = 1e-12;
constexpr double kLeafWiseMinChildHessian = 1e-3;

struct NodeStats {
  double g = 0.0;
  double h = 0.0;
  int n = 0;

  void add(double gi, double hi) {
    g += gi;
    h += hi;
    ++n;
  }
  NodeStats minus(const NodeStats& o) const { return {g - o.g, h - o.h, n - o.n}; }
};

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;

  bool valid() const noexcept { return feature >= 0; }
};

// Effective regularisation after resolving which knobs the growth honours.
struct SplitParams {
  double lambda_l1 = 0.0;
  double lambda_l2 = 1.0;
  double min_hessian = 1.0;
  int min_count = 1;
  double gamma = 0.0;
  int max_delta_step = 0;
  double learning_rate = 0.1;

  static SplitParams from(const GbdtConfig& cfg) {
    SplitParams p;
    p.lambda_l1 = cfg.lambda_l1;
    p.lambda_l2 = cfg.lambda_l2;
    p.learning_rate = cfg.learning_rate;
    if (cfg.growth == Growth::DepthWise) {
      p.min_hessian = cfg.min_child_weight;
      p.min_count = 1;
      p.gamma = cfg.gamma;
      p.max_delta_step = cfg.max_delta_step;
    } else {
      p.min_hessian = kLeafWiseMinChildHessian;
      p.min_count = std::max(1, cfg.min_child_samples);
      p.gamma = 0.0;
      p.max_delta_step = 0;
    }
    return p;
  }

  double soft_threshold(double g) const {
    if (g > lambda_l1) return g - lambda_l1;
    if (g < -lambda_l1) return g + lambda_l1;
    return 0.0;
  }
  double score(const NodeStats& s) const {
    const double t = soft_threshold(s.g);
    return t * t / (s.h + lambda_l2);
  }
  double leaf_weight(const NodeStats& s) const {
    double w = -soft_threshold(s.g) / (s.h + lambda_l2);
    if (max_delta_step > 0) w = std::clamp(w, -double(max_delta_step), double(max_delta_step));
    return w;
  }
  bool admissible(const NodeStats& l, const NodeStats& r) const {
    return l.h >= min_hessian && r.h >= min_hessian && l.n >= min_count && r.n >= min_count;
  }
};

struct GradPair {
  double g = 0.0;
  double h = 0.0;
};

struct SortedEntry {
  double value;
  std::uint32_t row;
};

// Column-major copy of the training matrix plus whichever split index the
// configured mode needs.
struct TrainData {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> columns;
  std::vector<std::vector<SortedEntry>> sorted;  // exact mode, ascending per column
  std::vector<std::vector<double>> cuts;         // histogram mode
  std::vector<std::uint8_t> bins;                // histogram mode, row-major

  double value(std::size_t f, std::size_t i) const noexcept { return columns[f * rows + i]; }
  const std::uint8_t* bin_row(std::size_t i) const noexcept { return bins.data() + i * cols; }
};

TrainData prepare(const Matrix& x, bool histogram, int max_bins) {
  TrainData d;
  d.rows = x.rows;
  d.cols = x.cols;
  d.columns.resize(x.rows * x.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t f = 0; f < x.cols; ++f) d.columns[f * x.rows + i] = x(i, f);

  std::vector<std::uint32_t> order(x.rows);
  if (!histogram) d.sorted.resize(x.cols);
  else {
    d.cuts.resize(x.cols);
    d.bins.resize(x.rows * x.cols);
  }
  const std::size_t bins_cap = static_cast<std::size_t>(std::clamp(max_bins, 2, 256));
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::iota(order.begin(), order.end(), 0u);
    const double* col = d.columns.data() + f * x.rows;
    std::stable_sort(order.begin(), order.end(),
                     [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    if (!histogram) {
      auto& entries = d.sorted[f];
      entries.reserve(x.rows);
      for (auto i : order) entries.push_back({col[i], i});
      continue;
    }
    std::vector<double> distinct;
    for (auto i : order)
      if (distinct.empty() || col[i] > distinct.back()) distinct.push_back(col[i]);
    auto& cuts = d.cuts[f];
    if (distinct.size() <= bins_cap) {
      for (std::size_t k = 0; k + 1 < distinct.size(); ++k) {
        double m = distinct[k] + (distinct[k + 1] - distinct[k]) / 2.0;
        if (!(m > distinct[k])) m = distinct[k + 1];
        cuts.push_back(m);
      }
    } else {
      // Quantile cut points over the row distribution; a cut c sends x < c left.
      for (std::size_t q = 1; q < bins_cap; ++q) {
        const double c = col[order[q * x.rows / bins_cap]];
        if (c > col[order.front()] && (cuts.empty() || c > cuts.back())) cuts.push_back(c);
      }
    }
    for (std::size_t i = 0; i < x.rows; ++i) {
      const auto b = std::upper_bound(cuts.begin(), cuts.end(), col[i]) - cuts.begin();
      d.bins[i * x.cols + f] = static_cast<std::uint8_t>(b);
    }
  }
  return d;
}

class TreeBuilder {
 public:
  TreeBuilder(const TrainData& data, std::span<const GradPair> gh, std::span<const std::uint32_t> rows,
              std::span<const std::uint32_t> features, const GbdtConfig& cfg)
      : data_(data), gh_(gh), features_(features), cfg_(cfg),
        params_(SplitParams::from(cfg)), histogram_(cfg.uses_histogram()),
        node_of_(data.rows, -1) {
    NodeStats root;
    for (auto i : rows) {
      root.add(gh_[i].g, gh_[i].h);
      node_of_[i] = 0;
    }
    add_node(root, 0);
    node_rows_.emplace_back(rows.begin(), rows.end());
  }

  Tree build() {
    if (cfg_.growth == Growth::DepthWise)
      grow_depthwise();
    else
      grow_leafwise();
    Tree tree;
    tree.nodes = std::move(nodes_);
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      auto& node = tree.nodes[i];
      node.cover = stats_[i].h;
      node.n_samples = stats_[i].n;
      if (node.is_leaf()) node.leaf_value = params_.learning_rate * params_.leaf_weight(stats_[i]);
    }
    return tree;
  }

 private:
  int add_node(const NodeStats& s, int depth) {
    nodes_.emplace_back();
    stats_.push_back(s);
    depth_.push_back(depth);
    return static_cast<int>(nodes_.size() - 1);
  }

  void consider(Split& best, int feature, double threshold, const NodeStats& left,
                const NodeStats& parent, double parent_score) const {
    const NodeStats right = parent.minus(left);
    if (!params_.admissible(left, right)) return;
    // score(l) + score(r) > target, cross-multiplied so most candidates skip the divisions.
    const double tl = params_.soft_threshold(left.g);
    const double tr = params_.soft_threshold(right.g);
    const double dl = left.h + params_.lambda_l2;
    const double dr = right.h + params_.lambda_l2;
    if (tl * tl * dr + tr * tr * dl <= (best.gain + parent_score) * dl * dr) return;
    const double gain = tl * tl / dl + tr * tr / dr - parent_score;
    if (gain > best.gain) best = {feature, threshold, gain};
  }

  bool acceptable(const Split& s) const {
    return s.valid() && s.gain > kMinGain && s.gain >= params_.gamma;
  }

  // One pass over each presorted column evaluates every node in `nodes`.
  std::vector<Split> exact_scan(std::span<const int> nodes) const {
    std::vector<int> slot_of_row(data_.rows, -1);
    for (std::size_t s = 0; s < nodes.size(); ++s)
      for (auto row : node_rows_[nodes[s]]) slot_of_row[row] = static_cast<int>(s);
    std::vector<double> parent_score(nodes.size());
    for (std::size_t s = 0; s < nodes.size(); ++s) parent_score[s] = params_.score(stats_[nodes[s]]);
    std::vector<Split> best(nodes.size());
    struct ScanState {
      NodeStats acc;
      double last = 0.0;
    };
    std::vector<ScanState> state(nodes.size());
    for (auto f : features_) {
      std::fill(state.begin(), state.end(), ScanState{});
      for (const auto& e : data_.sorted[f]) {
        const int s = slot_of_row[e.row];
        if (s < 0) continue;
        auto& st = state[static_cast<std::size_t>(s)];
        if (st.acc.n > 0 && e.value > st.last) {
          double threshold = st.last + (e.value - st.last) / 2.0;
          if (!(threshold > st.last)) threshold = e.value;
          consider(best[static_cast<std::size_t>(s)], static_cast<int>(f), threshold, st.acc,
                   stats_[nodes[static_cast<std::size_t>(s)]], parent_score[static_cast<std::size_t>(s)]);
        }
        const auto& gh = gh_[e.row];
        st.acc.add(gh.g, gh.h);
        st.last = e.value;
      }
    }
    return best;
  }

  Split histogram_scan(int node) const {
    Split best;
    const std::size_t nf = features_.size();
    if (hist_offset_.empty()) {
      hist_offset_.push_back(0);
      for (auto f : features_) hist_offset_.push_back(hist_offset_.back() + data_.cuts[f].size() + 1);
    }
    hist_.assign(hist_offset_.back(), NodeStats{});
    for (auto row : node_rows_[node]) {
      const std::uint8_t* b = data_.bin_row(row);
      const auto& gh = gh_[row];
      for (std::size_t k = 0; k < nf; ++k) hist_[hist_offset_[k] + b[features_[k]]].add(gh.g, gh.h);
    }
    const NodeStats& parent = stats_[node];
    const double parent_score = params_.score(parent);
    for (std::size_t k = 0; k < nf; ++k) {
      const auto f = features_[k];
      const auto& cuts = data_.cuts[f];
      const NodeStats* h = hist_.data() + hist_offset_[k];
      NodeStats acc;
      for (std::size_t b = 0; b < cuts.size(); ++b) {
        if (h[b].n == 0) continue;
        acc.g += h[b].g;
        acc.h += h[b].h;
        acc.n += h[b].n;
        consider(best, static_cast<int>(f), cuts[b], acc, parent, parent_score);
      }
    }
    return best;
  }

  std::vector<Split> evaluate(std::span<const int> nodes) const {
    if (!histogram_) return exact_scan(nodes);
    std::vector<Split> out;
    out.reserve(nodes.size());
    for (int n : nodes) out.push_back(histogram_scan(n));
    return out;
  }

  std::pair<int, int> apply_split(int node, const Split& split) {
    NodeStats left_stats, right_stats;
    std::vector<std::uint32_t> left_rows, right_rows;
    for (auto row : node_rows_[node]) {
      if (data_.value(static_cast<std::size_t>(split.feature), row) < split.threshold) {
        left_stats.add(gh_[row].g, gh_[row].h);
        left_rows.push_back(row);
      } else {
        right_stats.add(gh_[row].g, gh_[row].h);
        right_rows.push_back(row);
      }
    }
    const int depth = depth_[node] + 1;
    const int l = add_node(left_stats, depth);
    const int r = add_node(right_stats, depth);
    for (auto row : left_rows) node_of_[row] = l;
    for (auto row : right_rows) node_of_[row] = r;
    node_rows_.push_back(std::move(left_rows));
    node_rows_.push_back(std::move(right_rows));
    node_rows_[node].clear();
    node_rows_[node].shrink_to_fit();

    auto& n = nodes_[node];
    n.split_feature = split.feature;
    n.threshold = split.threshold;
    n.gain = split.gain;
    n.left = l;
    n.right = r;
    return {l, r};
  }

  void grow_depthwise() {
    std::vector<int> frontier = {0};
    for (int depth = 0; depth < cfg_.max_depth && !frontier.empty(); ++depth) {
      const auto splits = evaluate(frontier);
      std::vector<int> next;
      for (std::size_t i = 0; i < frontier.size(); ++i) {
        if (!acceptable(splits[i])) continue;
        const auto [l, r] = apply_split(frontier[i], splits[i]);
        next.push_back(l);
        next.push_back(r);
      }
      frontier = std::move(next);
    }
  }

  void grow_leafwise() {
    const bool depth_limited = cfg_.max_depth > 0;
    std::vector<Split> candidate(1);
    auto can_grow = [&](int node) { return !depth_limited || depth_[node] < cfg_.max_depth; };
    if (can_grow(0)) candidate[0] = evaluate(std::vector<int>{0})[0];

    int leaves = 1;
    while (leaves < std::max(2, cfg_.num_leaves)) {
      int best = -1;
      for (std::size_t n = 0; n < candidate.size(); ++n) {
        if (!nodes_[n].is_leaf() || !acceptable(candidate[n])) continue;
        if (best < 0 || candidate[n].gain > candidate[best].gain) best = static_cast<int>(n);
      }
      if (best < 0) break;
      const auto [l, r] = apply_split(best, candidate[best]);
      candidate.resize(nodes_.size());
      candidate[best] = Split{};
      std::vector<int> children;
      if (can_grow(l)) children.push_back(l);
      if (can_grow(r)) children.push_back(r);
      const auto splits = evaluate(children);
      for (std::size_t i = 0; i < children.size(); ++i) candidate[children[i]] = splits[i];
      ++leaves;
    }
  }

  const TrainData& data_;
  std::span<const GradPair> gh_;
  std::span<const std::uint32_t> features_;
  const GbdtConfig& cfg_;
  SplitParams params_;
  bool histogram_;

  std::vector<TreeNode> nodes_;
  std::vector<NodeStats> stats_;
  std::vector<int> depth_;
  std::vector<int> node_of_;
  std::vector<std::vector<std::uint32_t>> node_rows_;
  mutable std::vector<NodeStats> hist_;
  mutable std::vector<std::size_t> hist_offset_;
};

std::vector<std::uint32_t> sample_indices(Rng& rng, std::size_t n, double fraction) {
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  if (fraction >= 1.0) return idx;
  const auto k = static_cast<std::size_t>(
      std::clamp<long long>(std::llround(fraction * static_cast<double>(n)), 1, static_cast<long long>(n)));
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

void validate_config(const GbdtConfig& cfg) {
  auto bad = [](const std::string& what) { throw Error(ErrorKind::ConfigInvalid, what); };
  if (cfg.n_estimators < 0) bad("n_estimators must be >= 0");
  if (!(cfg.learning_rate > 0.0)) bad("learning_rate must be positive");
  if (cfg.growth == Growth::DepthWise && cfg.max_depth < 1) bad("max_depth must be >= 1 for depth-wise growth");
  if (!(cfg.subsample > 0.0 && cfg.subsample <= 1.0)) bad("subsample must lie in (0, 1]");
  if (!(cfg.colsample > 0.0 && cfg.colsample <= 1.0)) bad("colsample must lie in (0, 1]");
  if (cfg.lambda_l1 < 0.0 || cfg.lambda_l2 < 0.0) bad("regularisation must be non-negative");
  if (cfg.gamma < 0.0 || cfg.min_child_weight < 0.0 || cfg.max_delta_step < 0) bad("negative constraint");
  if (cfg.max_bins < 2 || cfg.max_bins > 256) bad("max_bins must lie in [2, 256]");
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view growth_name(Growth g) { return g == Growth::DepthWise ? "depthwise" : "leafwise"; }

Growth parse_growth(std::string_view text) {
  if (text == "depthwise" || text == "DepthWise") return Growth::DepthWise;
  if (text == "leafwise" || text == "LeafWise") return Growth::LeafWise;
  throw Error(ErrorKind::ConfigInvalid, "unknown growth '" + std::string(text) + "'");
}

std::size_t Tree::leaf_index(std::span<const double> x) const noexcept {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.split_feature)] < n.threshold ? n.left : n.right);
  }
  return i;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].is_leaf()) continue;
    d[nodes[i].left] = d[nodes[i].right] = d[i] + 1;
    best = std::max(best, d[i] + 1);
  }
  return best;
}

std::size_t Tree::n_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

ClassWeights class_weights(std::span<const std::size_t> counts) {
  ClassWeights w;
  w.count.assign(counts.begin(), counts.end());
  w.total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  const double n = static_cast<double>(w.total);
  const double c = static_cast<double>(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) throw Error(ErrorKind::EmptyClass, "class " + std::to_string(k) + " has no samples");
    w.weight.push_back(n / (c * static_cast<double>(counts[k])));
  }
  return w;
}

ClassWeights class_weights(std::span<const BehaviorClass> labels) {
  const auto counts = class_counts(labels);
  return class_weights(std::span<const std::size_t>(counts));
}

std::vector<double> sample_weights(std::span<const BehaviorClass> labels, const ClassWeights& w) {
  std::vector<double> out;
  out.reserve(labels.size());
  for (auto c : labels) out.push_back(w[static_cast<std::size_t>(ordinal(c))]);
  return out;
}

void softmax(std::span<double> v) {
  if (v.empty()) return;
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

GbdtModel train(const Matrix& x, std::span<const int> labels, std::span<const double> weights,
                const GbdtConfig& cfg, std::vector<std::string> feature_names, int n_classes) {
  validate_config(cfg);
  if (labels.size() != x.rows || weights.size() != x.rows)
    throw Error(ErrorKind::FeatureMismatch, "labels/weights length must equal the row count");
  if (!feature_names.empty() && feature_names.size() != x.cols)
    throw Error(ErrorKind::FeatureMismatch, "feature name count differs from column count");
  if (x.rows == 0 || n_classes < 2) throw Error(ErrorKind::DegenerateData, "no training rows");
  for (double v : x.data)
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteSample, "training matrix contains NaN/Inf");
  for (std::size_t i = 0; i < x.rows; ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) throw Error(ErrorKind::FeatureMismatch, "label out of range", i);
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
      throw Error(ErrorKind::ConfigInvalid, "sample weights must be positive and finite", i);
  }
  if (std::all_of(labels.begin(), labels.end(), [&](int l) { return l == labels[0]; }))
    throw Error(ErrorKind::DegenerateData, "all labels are identical");

  GbdtModel model;
  model.n_classes = n_classes;
  model.config = cfg;
  model.base_score.assign(static_cast<std::size_t>(n_classes), 0.0);
  if (feature_names.empty())
    for (std::size_t f = 0; f < x.cols; ++f) feature_names.push_back("f" + std::to_string(f));
  model.feature_names = std::move(feature_names);

  const TrainData data = prepare(x, cfg.uses_histogram(), cfg.max_bins);
  const std::size_t n = x.rows;
  const auto classes = static_cast<std::size_t>(n_classes);
  Matrix margin(n, classes);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < classes; ++c) margin(i, c) = model.base_score[c];

  Matrix prob(n, classes);
  std::vector<std::vector<GradPair>> grad(classes, std::vector<GradPair>(n));

  for (int round = 0; round < cfg.n_estimators; ++round) {
    prob.data = margin.data;
    for (std::size_t i = 0; i < n; ++i) softmax(prob.row(i));

    std::vector<Tree> trees(classes);
    parallel_for(classes, [&](std::size_t c) {
      auto& gh = grad[c];
      for (std::size_t i = 0; i < n; ++i) {
        const double p = prob(i, c);
        const double target = labels[i] == static_cast<int>(c) ? 1.0 : 0.0;
        gh[i] = {weights[i] * (p - target), std::max(weights[i] * p * (1.0 - p), kMinHessian)};
      }
      Rng rng(cfg.seed, {static_cast<std::uint64_t>(round), c});
      const auto rows = sample_indices(rng, n, cfg.subsample);
      const auto feats = sample_indices(rng, x.cols, cfg.colsample);
      TreeBuilder builder(data, gh, rows, feats, cfg);
      trees[c] = builder.build();
    });

    for (std::size_t c = 0; c < classes; ++c)
      for (std::size_t i = 0; i < n; ++i) margin(i, c) += trees[c].predict(x.row(i));
    model.trees.push_back(std::move(trees));
  }
  return model;
}

GbdtModel train(const Matrix& x, std::span<const BehaviorClass> labels,
                std::span<const double> weights, const GbdtConfig& cfg,
                std::vector<std::string> feature_names) {
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = ordinal(labels[i]);
  return train(x, y, weights, cfg, std::move(feature_names), kNumClasses);
}

std::vector<double> predict_margin(const GbdtModel& model, std::span<const double> row,
                                   long max_rounds) {
  std::vector<double> m = model.base_score;
  const std::size_t rounds = max_rounds < 0 ? model.trees.size()
                                            : std::min(model.trees.size(), static_cast<std::size_t>(max_rounds));
  for (std::size_t r = 0; r < rounds; ++r)
    for (std::size_t c = 0; c < m.size(); ++c) m[c] += model.trees[r][c].predict(row);
  return m;
}

Matrix predict_margin(const GbdtModel& model, const Matrix& x, long max_rounds) {
  if (x.cols != model.n_features())
    throw Error(ErrorKind::FeatureMismatch, "model expects " + std::to_string(model.n_features()) +
                                                " features, got " + std::to_string(x.cols));
  Matrix out(x.rows, static_cast<std::size_t>(model.n_classes));
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto m = predict_margin(model, x.row(i), max_rounds);
    std::copy(m.begin(), m.end(), out.row(i).begin());
  }
  return out;
}

Matrix predict_proba(const GbdtModel& model, const Matrix& x, long max_rounds) {
  Matrix out = predict_margin(model, x, max_rounds);
  for (std::size_t i = 0; i < out.rows; ++i) softmax(out.row(i));
  return out;
}

double log_loss(const Matrix& proba, std::span<const int> labels, std::span<const double> weights) {
  double loss = 0.0, total = 0.0;
  for (std::size_t i = 0; i < proba.rows; ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    loss -= w * std::log(std::max(proba(i, static_cast<std::size_t>(labels[i])), 1e-300));
    total += w;
  }
  return loss / total;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using ojson = nlohmann::ordered_json;

ojson config_to_json_doc(const GbdtConfig& c) {
  return ojson{{"n_estimators", c.n_estimators},
               {"learning_rate", c.learning_rate},
               {"max_depth", c.max_depth},
               {"subsample", c.subsample},
               {"colsample", c.colsample},
               {"min_child_weight", c.min_child_weight},
               {"gamma", c.gamma},
               {"max_delta_step", c.max_delta_step},
               {"num_leaves", c.num_leaves},
               {"min_child_samples", c.min_child_samples},
               {"lambda_l1", c.lambda_l1},
               {"lambda_l2", c.lambda_l2},
               {"growth", std::string(growth_name(c.growth))},
               {"split_mode", c.split_mode == SplitMode::Auto    ? "auto"
                              : c.split_mode == SplitMode::Exact ? "exact"
                                                                 : "histogram"},
               {"max_bins", c.max_bins},
               {"seed", c.seed}};
}

GbdtConfig config_from_json_doc(const ojson& j) {
  GbdtConfig c;
  c.n_estimators = j.at("n_estimators").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.max_depth = j.at("max_depth").get<int>();
  c.subsample = j.at("subsample").get<double>();
  c.colsample = j.at("colsample").get<double>();
  c.min_child_weight = j.at("min_child_weight").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.max_delta_step = j.at("max_delta_step").get<int>();
  c.num_leaves = j.at("num_leaves").get<int>();
  c.min_child_samples = j.at("min_child_samples").get<int>();
  c.lambda_l1 = j.at("lambda_l1").get<double>();
  c.lambda_l2 = j.at("lambda_l2").get<double>();
  c.growth = parse_growth(j.at("growth").get<std::string>());
  const auto mode = j.at("split_mode").get<std::string>();
  c.split_mode = mode == "exact" ? SplitMode::Exact : mode == "histogram" ? SplitMode::Histogram : SplitMode::Auto;
  c.max_bins = j.at("max_bins").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

ojson tree_to_json(const Tree& t) {
  ojson feature = ojson::array(), threshold = ojson::array(), left = ojson::array(),
        right = ojson::array(), value = ojson::array(), cover = ojson::array(),
        count = ojson::array(), gain = ojson::array();
  for (const auto& n : t.nodes) {
    feature.push_back(n.split_feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.leaf_value);
    cover.push_back(n.cover);
    count.push_back(n.n_samples);
    gain.push_back(n.gain);
  }
  return ojson{{"split_feature", feature}, {"threshold", threshold}, {"left", left},
               {"right", right},           {"leaf_value", value},    {"cover", cover},
               {"n_samples", count},       {"gain", gain}};
}

Tree tree_from_json(const ojson& j, std::size_t n_features) {
  const auto& feature = j.at("split_feature");
  const std::size_t n = feature.size();
  const char* fields[] = {"threshold", "left", "right", "leaf_value", "cover", "n_samples", "gain"};
  for (const char* f : fields)
    if (j.at(f).size() != n) throw Error(ErrorKind::SchemaVersionMismatch, "tree arrays differ in length");
  if (n == 0) throw Error(ErrorKind::SchemaVersionMismatch, "empty tree");
  Tree t;
  t.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = t.nodes[i];
    node.split_feature = feature[i].get<int>();
    node.threshold = j["threshold"][i].get<double>();
    node.left = j["left"][i].get<int>();
    node.right = j["right"][i].get<int>();
    node.leaf_value = j["leaf_value"][i].get<double>();
    node.cover = j["cover"][i].get<double>();
    node.n_samples = j["n_samples"][i].get<int>();
    node.gain = j["gain"][i].get<double>();
    if (!node.is_leaf()) {
      const auto in_range = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(n); };
      if (node.split_feature < 0 || static_cast<std::size_t>(node.split_feature) >= n_features ||
          !in_range(node.left) || !in_range(node.right))
        throw Error(ErrorKind::SchemaVersionMismatch, "tree node references out of range");
    }
  }
  return t;
}

}  // namespace

std::string config_to_json(const GbdtConfig& cfg) { return config_to_json_doc(cfg).dump(); }

GbdtConfig config_from_json(std::string_view text) {
  try {
    return config_from_json_doc(ojson::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaVersionMismatch, std::string("malformed config JSON: ") + e.what());
  }
}

std::string to_json(const GbdtModel& model, int indent) {
  ojson doc;
  doc["schema_version"] = kModelSchemaVersion;
  doc["growth"] = std::string(growth_name(model.config.growth));
  doc["config"] = config_to_json_doc(model.config);
  doc["n_classes"] = model.n_classes;
  doc["base_score"] = model.base_score;
  ojson rounds = ojson::array();
  for (const auto& round : model.trees) {
    ojson per_class = ojson::array();
    for (const auto& t : round) per_class.push_back(tree_to_json(t));
    rounds.push_back(std::move(per_class));
  }
  doc["trees"] = std::move(rounds);
  doc["feature_names"] = model.feature_names;
  return doc.dump(indent);
}

GbdtModel from_json(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaVersionMismatch, std::string("model JSON does not parse: ") + e.what());
  }
  try {
    if (!doc.is_object() || doc.value("schema_version", -1) != kModelSchemaVersion)
      throw Error(ErrorKind::SchemaVersionMismatch, "model schema_version must be 1");
    GbdtModel model;
    model.config = config_from_json_doc(doc.at("config"));
    model.n_classes = doc.at("n_classes").get<int>();
    model.base_score = doc.at("base_score").get<std::vector<double>>();
    model.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
    if (model.base_score.size() != static_cast<std::size_t>(model.n_classes))
      throw Error(ErrorKind::SchemaVersionMismatch, "base_score length differs from n_classes");
    for (const auto& round : doc.at("trees")) {
      if (round.size() != static_cast<std::size_t>(model.n_classes))
        throw Error(ErrorKind::SchemaVersionMismatch, "round does not hold one tree per class");
      std::vector<Tree> trees;
      for (const auto& t : round) trees.push_back(tree_from_json(t, model.feature_names.size()));
      model.trees.push_back(std::move(trees));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaVersionMismatch, std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace physiodecode::gbdt
