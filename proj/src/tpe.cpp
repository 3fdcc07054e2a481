#include "physiodecode/tpe.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "physiodecode/ensemble.hpp"
#include "physiodecode/error.hpp"
#include "physiodecode/eval.hpp"
#include "physiodecode/rng.hpp"

namespace physiodecode::tpe {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kPriorStream = 0x7072696f72ULL;
constexpr std::uint64_t kSuggestStream = 0x7375676765ULL;

}  // namespace

// ---------------------------------------------------------------------------
// Dimensions and spaces

Dimension Dimension::uniform(std::string name, double lo, double hi) {
  return {std::move(name), DimKind::Uniform, lo, hi, 1.0, {}};
}

Dimension Dimension::log_uniform(std::string name, double lo, double hi) {
  return {std::move(name), DimKind::LogUniform, lo, hi, 1.0, {}};
}

Dimension Dimension::int_step(std::string name, double lo, double hi, double step) {
  return {std::move(name), DimKind::IntStep, lo, hi, step, {}};
}

Dimension Dimension::categorical(std::string name, std::vector<std::string> choices) {
  const double hi = choices.empty() ? 0.0 : static_cast<double>(choices.size() - 1);
  return {std::move(name), DimKind::Categorical, 0.0, hi, 1.0, std::move(choices)};
}

std::size_t Dimension::n_levels() const {
  switch (kind) {
    case DimKind::IntStep: return static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    case DimKind::Categorical: return choices.size();
    default: return 0;
  }
}

double Dimension::level_value(std::size_t k) const {
  return kind == DimKind::IntStep ? lo + static_cast<double>(k) * step : static_cast<double>(k);
}

std::size_t Dimension::level_of(double value) const {
  const double raw = kind == DimKind::IntStep ? (value - lo) / step : value;
  const auto k = static_cast<std::ptrdiff_t>(std::llround(raw));
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(n_levels()) - 1));
}

bool Dimension::contains(double value) const {
  if (!std::isfinite(value) || value < lo || value > hi) return false;
  if (kind == DimKind::IntStep || kind == DimKind::Categorical) {
    const double raw = kind == DimKind::IntStep ? (value - lo) / step : value;
    return std::abs(raw - std::round(raw)) < 1e-9;
  }
  return true;
}

void SearchSpace::validate() const {
  if (dims.empty()) throw Error(ErrorKind::EmptySpace, "search space has no dimensions");
  for (const auto& d : dims) {
    const bool finite = std::isfinite(d.lo) && std::isfinite(d.hi);
    if (!finite || d.lo > d.hi)
      throw Error(ErrorKind::ConfigInvalid, "dimension '" + d.name + "' has invalid bounds");
    if (d.kind == DimKind::LogUniform && d.lo <= 0.0)
      throw Error(ErrorKind::ConfigInvalid, "log-uniform dimension '" + d.name + "' needs lo > 0");
    if (d.kind == DimKind::IntStep && !(d.step > 0.0))
      throw Error(ErrorKind::ConfigInvalid, "dimension '" + d.name + "' needs a positive step");
    if (d.kind == DimKind::Categorical && d.choices.empty())
      throw Error(ErrorKind::EmptySpace, "categorical dimension '" + d.name + "' has no choices");
  }
}

bool SearchSpace::contains(const Params& p) const {
  for (const auto& d : dims) {
    const auto it = p.find(d.name);
    if (it == p.end() || !d.contains(it->second)) return false;
  }
  return true;
}

const Dimension* SearchSpace::find(std::string_view name) const {
  for (const auto& d : dims)
    if (d.name == name) return &d;
  return nullptr;
}

SearchSpace depthwise_space() {
  return {{Dimension::int_step("n_estimators", 500, 2000, 100),
           Dimension::log_uniform("learning_rate", 0.005, 0.05),
           Dimension::int_step("max_depth", 4, 10),
           Dimension::uniform("subsample", 0.6, 1.0),
           Dimension::uniform("colsample", 0.5, 1.0),
           Dimension::uniform("min_child_weight", 1.0, 10.0),
           Dimension::uniform("gamma", 0.0, 1.0),
           Dimension::int_step("max_delta_step", 0, 5)}};
}

SearchSpace leafwise_space() {
  return {{Dimension::int_step("n_estimators", 500, 2000, 100),
           Dimension::log_uniform("learning_rate", 0.005, 0.05),
           Dimension::int_step("max_depth", 4, 10),
           Dimension::uniform("subsample", 0.6, 1.0),
           Dimension::uniform("colsample", 0.5, 1.0),
           Dimension::int_step("num_leaves", 20, 150),
           Dimension::int_step("min_child_samples", 10, 100),
           Dimension::log_uniform("lambda_l1", 1e-4, 10.0),
           Dimension::log_uniform("lambda_l2", 1e-4, 10.0)}};
}

SearchSpace alpha_space() { return {{Dimension::uniform("alpha", 0.0, 1.0)}}; }

SearchSpace joint_space(const SearchSpace& a, const SearchSpace& b) {
  SearchSpace out;
  for (auto d : a.dims) {
    d.name = "a." + d.name;
    out.dims.push_back(std::move(d));
  }
  for (auto d : b.dims) {
    d.name = "b." + d.name;
    out.dims.push_back(std::move(d));
  }
  out.dims.push_back(Dimension::uniform("alpha", 0.0, 1.0));
  return out;
}

SearchSpace desk_depthwise_space() {
  return {{Dimension::int_step("n_estimators", 20, 120, 20),
           Dimension::log_uniform("learning_rate", 0.05, 0.3),
           Dimension::int_step("max_depth", 2, 5),
           Dimension::uniform("subsample", 0.6, 1.0),
           Dimension::uniform("colsample", 0.5, 1.0),
           Dimension::uniform("min_child_weight", 1.0, 10.0),
           Dimension::uniform("gamma", 0.0, 1.0),
           Dimension::int_step("max_delta_step", 0, 5)}};
}

SearchSpace desk_leafwise_space() {
  return {{Dimension::int_step("n_estimators", 20, 120, 20),
           Dimension::log_uniform("learning_rate", 0.05, 0.3),
           Dimension::int_step("max_depth", 2, 6),
           Dimension::uniform("subsample", 0.6, 1.0),
           Dimension::uniform("colsample", 0.5, 1.0),
           Dimension::int_step("num_leaves", 4, 32),
           Dimension::int_step("min_child_samples", 5, 40),
           Dimension::log_uniform("lambda_l1", 1e-4, 10.0),
           Dimension::log_uniform("lambda_l2", 1e-4, 10.0)}};
}

std::string_view state_name(TrialState s) {
  switch (s) {
    case TrialState::Complete: return "complete";
    case TrialState::Pruned: return "pruned";
    case TrialState::Failed: return "failed";
  }
  return "failed";
}

// ---------------------------------------------------------------------------
// Parzen estimators

namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014327;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Unit-interval coordinate of a continuous value.
double to_unit(const Dimension& d, double x) {
  if (d.hi == d.lo) return 0.5;
  if (d.kind == DimKind::LogUniform)
    return (std::log(x) - std::log(d.lo)) / (std::log(d.hi) - std::log(d.lo));
  return (x - d.lo) / (d.hi - d.lo);
}

double from_unit(const Dimension& d, double u) {
  u = std::clamp(u, 0.0, 1.0);
  double x = d.kind == DimKind::LogUniform
                 ? std::exp(std::log(d.lo) + u * (std::log(d.hi) - std::log(d.lo)))
                 : d.lo + u * (d.hi - d.lo);
  return std::clamp(x, d.lo, d.hi);
}

double scott_bandwidth(std::span<const double> pts, double floor_width) {
  const auto n = static_cast<double>(pts.size());
  double sd = 0.0;
  if (pts.size() > 1) {
    const double mean = std::accumulate(pts.begin(), pts.end(), 0.0) / n;
    double ss = 0.0;
    for (double p : pts) ss += (p - mean) * (p - mean);
    sd = std::sqrt(ss / (n - 1.0));
  }
  return std::max(sd * std::pow(n, -0.2), floor_width);
}

// Equal-weight mixture of Gaussians truncated to [0, 1], with one broad prior
// component centred on the interval.
class TruncatedKde {
 public:
  TruncatedKde(std::vector<double> points, double floor_width) : centres_(std::move(points)) {
    // The minimum width shrinks with the number of observations, so a tight
    // cluster of early winners cannot freeze the search around itself.
    const double adaptive = 1.0 / std::min(100.0, static_cast<double>(centres_.size()) + 1.0);
    const double h = std::min(scott_bandwidth(centres_, std::max(floor_width, adaptive)), 1.0);
    widths_.assign(centres_.size(), h);
    centres_.push_back(0.5);
    widths_.push_back(1.0);
    for (std::size_t i = 0; i < centres_.size(); ++i)
      mass_.push_back(normal_cdf((1.0 - centres_[i]) / widths_[i]) - normal_cdf(-centres_[i] / widths_[i]));
  }

  double density(double u) const {
    double s = 0.0;
    for (std::size_t i = 0; i < centres_.size(); ++i) {
      const double z = (u - centres_[i]) / widths_[i];
      s += kInvSqrt2Pi * std::exp(-0.5 * z * z) / (widths_[i] * mass_[i]);
    }
    return s / static_cast<double>(centres_.size());
  }

  double sample(Rng& rng) const {
    const auto i = static_cast<std::size_t>(rng.below(centres_.size()));
    for (int attempt = 0; attempt < 64; ++attempt) {
      const double u = centres_[i] + widths_[i] * rng.normal();
      if (u >= 0.0 && u <= 1.0) return u;
    }
    return rng.uniform();
  }

 private:
  std::vector<double> centres_;
  std::vector<double> widths_;
  std::vector<double> mass_;
};

// Kernel-smoothed histogram over a discrete lattice plus one uniform
// pseudo-observation. Categorical levels get no kernel spread.
std::vector<double> smoothed_histogram(std::span<const std::size_t> levels, std::size_t n_levels,
                                       bool ordered, double floor_width) {
  std::vector<double> p(n_levels, 1.0 / static_cast<double>(n_levels));
  if (ordered && !levels.empty()) {
    std::vector<double> pts(levels.begin(), levels.end());
    const double h = std::max(scott_bandwidth(pts, floor_width * static_cast<double>(n_levels)), 0.5);
    for (double c : pts) {
      std::vector<double> k(n_levels);
      double z = 0.0;
      for (std::size_t l = 0; l < n_levels; ++l) {
        const double d = (static_cast<double>(l) - c) / h;
        k[l] = std::exp(-0.5 * d * d);
        z += k[l];
      }
      for (std::size_t l = 0; l < n_levels; ++l) p[l] += k[l] / z;
    }
  } else {
    for (auto l : levels) p[l] += 1.0;
  }
  const double total = static_cast<double>(levels.size()) + 1.0;
  for (auto& v : p) v /= total;
  return p;
}

std::size_t sample_discrete(std::span<const double> p, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  return p.size() - 1;
}

}  // namespace

Study::Study(SearchSpace space, std::uint64_t seed, TpeConfig cfg)
    : space_(std::move(space)), seed_(seed), cfg_(cfg) {
  space_.validate();
  if (!(cfg_.gamma > 0.0 && cfg_.gamma < 1.0) || cfg_.n_candidates < 1 || cfg_.n_startup < 0)
    throw Error(ErrorKind::ConfigInvalid, "invalid TPE configuration");
}

Params Study::sample_prior(int trial_id) const {
  Params p;
  for (std::size_t i = 0; i < space_.dims.size(); ++i) {
    const auto& d = space_.dims[i];
    Rng rng(seed_, {kPriorStream, static_cast<std::uint64_t>(trial_id), i});
    if (d.kind == DimKind::IntStep || d.kind == DimKind::Categorical)
      p[d.name] = d.level_value(static_cast<std::size_t>(rng.below(d.n_levels())));
    else
      p[d.name] = from_unit(d, rng.uniform());
  }
  return p;
}

Params Study::suggest() const {
  const int id = static_cast<int>(trials_.size());
  std::vector<const Trial*> done;
  for (const auto& t : trials_)
    if (t.state == TrialState::Complete) done.push_back(&t);
  if (static_cast<int>(done.size()) < std::max(cfg_.n_startup, 2)) return sample_prior(id);
  const bool flat = std::all_of(done.begin(), done.end(),
                                [&](const Trial* t) { return t->objective == done.front()->objective; });
  if (flat) return sample_prior(id);

  std::stable_sort(done.begin(), done.end(),
                   [](const Trial* a, const Trial* b) { return a->objective > b->objective; });
  const auto n_good = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(cfg_.gamma * static_cast<double>(done.size()))), 1,
      done.size() - 1);

  Params out;
  for (std::size_t i = 0; i < space_.dims.size(); ++i) {
    const auto& d = space_.dims[i];
    Rng rng(seed_, {kSuggestStream, static_cast<std::uint64_t>(id), i});
    if (d.kind == DimKind::IntStep || d.kind == DimKind::Categorical) {
      std::vector<std::size_t> good, bad;
      for (std::size_t r = 0; r < done.size(); ++r)
        (r < n_good ? good : bad).push_back(d.level_of(done[r]->params.at(d.name)));
      const bool ordered = d.kind == DimKind::IntStep;
      const auto l = smoothed_histogram(good, d.n_levels(), ordered, cfg_.bandwidth_floor);
      const auto g = smoothed_histogram(bad, d.n_levels(), ordered, cfg_.bandwidth_floor);
      std::size_t best = 0;
      double best_score = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < cfg_.n_candidates; ++c) {
        const auto k = sample_discrete(l, rng);
        const double score = std::log(l[k]) - std::log(g[k]);
        if (score > best_score) {
          best_score = score;
          best = k;
        }
      }
      out[d.name] = d.level_value(best);
    } else {
      std::vector<double> good, bad;
      for (std::size_t r = 0; r < done.size(); ++r)
        (r < n_good ? good : bad).push_back(to_unit(d, done[r]->params.at(d.name)));
      const TruncatedKde l(std::move(good), cfg_.bandwidth_floor);
      const TruncatedKde g(std::move(bad), cfg_.bandwidth_floor);
      double best = 0.5;
      double best_score = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < cfg_.n_candidates; ++c) {
        const double u = l.sample(rng);
        const double score = std::log(l.density(u)) - std::log(g.density(u));
        if (score > best_score) {
          best_score = score;
          best = u;
        }
      }
      out[d.name] = from_unit(d, best);
    }
  }
  return out;
}

void Study::tell(Trial trial) { trials_.push_back(std::move(trial)); }

std::optional<Trial> Study::best() const {
  const Trial* best = nullptr;
  for (const auto& t : trials_)
    if (t.state == TrialState::Complete && (best == nullptr || t.objective > best->objective)) best = &t;
  if (best == nullptr) return std::nullopt;
  return *best;
}

std::optional<Trial> Study::optimize(const Objective& objective, int n_trials,
                                     const std::optional<std::filesystem::path>& journal) {
  for (int i = 0; i < n_trials; ++i) {
    Trial t;
    t.id = static_cast<int>(trials_.size());
    t.params = suggest();
    const auto start = std::chrono::steady_clock::now();
    try {
      t.objective = objective(t.params);
      if (!std::isfinite(t.objective)) {
        t.state = TrialState::Failed;
        t.error = "non-finite objective";
        t.objective = 0.0;
      }
    } catch (const std::exception& e) {
      t.state = TrialState::Failed;
      t.error = e.what();
      t.objective = 0.0;
    }
    if (cfg_.record_duration)
      t.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (journal) append_journal(*journal, t, space_);
    tell(std::move(t));
  }
  return best();
}

void Study::load_journal(const std::filesystem::path& path) { trials_ = read_journal(path, space_); }

// ---------------------------------------------------------------------------
// Journal

std::string trial_to_json(const Trial& trial, const SearchSpace& space) {
  ordered_json j;
  j["id"] = trial.id;
  ordered_json params = ordered_json::object();
  for (const auto& d : space.dims) {
    const auto it = trial.params.find(d.name);
    if (it == trial.params.end()) continue;
    if (d.kind == DimKind::Categorical)
      params[d.name] = d.choices.at(d.level_of(it->second));
    else if (d.kind == DimKind::IntStep)
      params[d.name] = static_cast<long long>(std::llround(it->second));
    else
      params[d.name] = it->second;
  }
  j["params"] = std::move(params);
  if (trial.state == TrialState::Complete)
    j["objective"] = trial.objective;
  else
    j["objective"] = nullptr;
  j["state"] = state_name(trial.state);
  j["duration_s"] = trial.duration_s;
  if (!trial.error.empty()) j["error"] = trial.error;
  return j.dump();
}

Trial trial_from_json(std::string_view line, const SearchSpace& space) {
  try {
    const auto j = ordered_json::parse(line);
    Trial t;
    t.id = j.at("id").get<int>();
    const auto state = j.at("state").get<std::string>();
    t.state = state == "complete" ? TrialState::Complete
              : state == "pruned" ? TrialState::Pruned
                                  : TrialState::Failed;
    if (!j.at("objective").is_null()) t.objective = j.at("objective").get<double>();
    t.duration_s = j.value("duration_s", 0.0);
    t.error = j.value("error", std::string{});
    for (const auto& [name, value] : j.at("params").items()) {
      const auto* d = space.find(name);
      if (d == nullptr) throw Error(ErrorKind::ConfigInvalid, "journal parameter '" + name + "' not in space");
      if (d->kind == DimKind::Categorical) {
        const auto choice = value.get<std::string>();
        const auto it = std::find(d->choices.begin(), d->choices.end(), choice);
        if (it == d->choices.end()) throw Error(ErrorKind::ConfigInvalid, "unknown choice '" + choice + "'");
        t.params[name] = static_cast<double>(it - d->choices.begin());
      } else {
        t.params[name] = value.get<double>();
      }
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaVersionMismatch, std::string("malformed journal line: ") + e.what());
  }
}

void append_journal(const std::filesystem::path& path, const Trial& trial, const SearchSpace& space) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorKind::Io, "cannot append to " + path.string());
  out << trial_to_json(trial, space) << '\n';
}

std::vector<Trial> read_journal(const std::filesystem::path& path, const SearchSpace& space) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingArtifact, "cannot open journal " + path.string());
  std::vector<Trial> trials;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) trials.push_back(trial_from_json(line, space));
  return trials;
}

// ---------------------------------------------------------------------------
// Objective plumbing

gbdt::GbdtConfig apply_params(gbdt::GbdtConfig c, const Params& params, std::string_view prefix) {
  const auto get = [&](std::string_view key) -> const double* {
    const auto it = params.find(std::string(prefix) + std::string(key));
    return it == params.end() ? nullptr : &it->second;
  };
  const auto as_int = [](double v) { return static_cast<int>(std::llround(v)); };
  if (const auto* v = get("n_estimators")) c.n_estimators = as_int(*v);
  if (const auto* v = get("learning_rate")) c.learning_rate = *v;
  if (const auto* v = get("max_depth")) c.max_depth = as_int(*v);
  if (const auto* v = get("subsample")) c.subsample = *v;
  if (const auto* v = get("colsample")) c.colsample = *v;
  if (const auto* v = get("min_child_weight")) c.min_child_weight = *v;
  if (const auto* v = get("gamma")) c.gamma = *v;
  if (const auto* v = get("max_delta_step")) c.max_delta_step = as_int(*v);
  if (const auto* v = get("num_leaves")) c.num_leaves = as_int(*v);
  if (const auto* v = get("min_child_samples")) c.min_child_samples = as_int(*v);
  if (const auto* v = get("lambda_l1")) c.lambda_l1 = *v;
  if (const auto* v = get("lambda_l2")) c.lambda_l2 = *v;
  return c;
}

Params params_from_config(const gbdt::GbdtConfig& c, const SearchSpace& space) {
  const std::map<std::string, double> all = {
      {"n_estimators", c.n_estimators}, {"learning_rate", c.learning_rate},
      {"max_depth", c.max_depth},       {"subsample", c.subsample},
      {"colsample", c.colsample},       {"min_child_weight", c.min_child_weight},
      {"gamma", c.gamma},               {"max_delta_step", c.max_delta_step},
      {"num_leaves", c.num_leaves},     {"min_child_samples", c.min_child_samples},
      {"lambda_l1", c.lambda_l1},       {"lambda_l2", c.lambda_l2}};
  Params p;
  for (const auto& d : space.dims)
    if (const auto it = all.find(d.name); it != all.end()) p[d.name] = it->second;
  return p;
}

CvFolds make_folds(std::span<const BehaviorClass> labels, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::ConfigInvalid, "cross-validation needs at least 2 folds");
  for (auto n : class_counts(labels))
    if (n > 0 && n < static_cast<std::size_t>(folds))
      throw Error(ErrorKind::ClassTooSmall, "a class has fewer samples than folds");
  return {stratified_folds(labels, folds, seed), folds};
}

CvResult cross_validate(const features::FeatureMatrix& data, const CvFolds& folds,
                        const gbdt::GbdtConfig& cfg) {
  if (folds.fold_of.size() != data.rows())
    throw Error(ErrorKind::LengthMismatch, "fold assignment does not match the data");
  CvResult result;
  result.oof_proba = Matrix(data.rows(), kNumClasses);
  for (int f = 0; f < folds.folds; ++f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < data.rows(); ++i)
      (folds.fold_of[i] == f ? test_rows : train_rows).push_back(i);
    const auto train = features::select_rows(data, train_rows);
    const auto test = features::select_rows(data, test_rows);
    const auto weights = gbdt::sample_weights(train.labels, gbdt::class_weights(train.labels));
    auto fold_cfg = cfg;
    fold_cfg.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(f)});
    const auto model = gbdt::train(train.values, train.labels, weights, fold_cfg, train.registry.names());
    const auto proba = gbdt::predict_proba(model, test.values);
    for (std::size_t r = 0; r < test_rows.size(); ++r)
      std::copy_n(proba.row(r).begin(), kNumClasses, result.oof_proba.row(test_rows[r]).begin());
    std::vector<int> truth(test.labels.size());
    for (std::size_t r = 0; r < truth.size(); ++r) truth[r] = ordinal(test.labels[r]);
    result.fold_macro_f1.push_back(eval::macro_f1(truth, ensemble::argmax_rows(proba)));
  }
  result.mean_macro_f1 = eval::macro_average(result.fold_macro_f1);
  return result;
}

double cv_objective(const features::FeatureMatrix& data, const CvFolds& folds,
                    const gbdt::GbdtConfig& cfg) {
  return cross_validate(data, folds, cfg).mean_macro_f1;
}

double blended_cv_score(const Matrix& oof_a, const Matrix& oof_b, std::span<const BehaviorClass> labels,
                        const CvFolds& folds, double alpha) {
  const auto pred = ensemble::argmax_rows(ensemble::blend(oof_a, oof_b, alpha));
  std::vector<double> scores;
  for (int f = 0; f < folds.folds; ++f) {
    std::vector<int> truth, guess;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (folds.fold_of[i] == f) {
        truth.push_back(ordinal(labels[i]));
        guess.push_back(pred[i]);
      }
    scores.push_back(eval::macro_f1(truth, guess));
  }
  return eval::macro_average(scores);
}

}  // namespace physiodecode::tpe
