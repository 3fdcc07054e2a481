#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "physiodecode/features.hpp"
#include "physiodecode/gbdt.hpp"
#include "physiodecode/matrix.hpp"

namespace physiodecode::tpe {

enum class DimKind { Uniform, LogUniform, IntStep, Categorical };

struct Dimension {
  std::string name;
  DimKind kind = DimKind::Uniform;
  double lo = 0.0;
  double hi = 1.0;
  double step = 1.0;                 // IntStep lattice spacing, offset from lo
  std::vector<std::string> choices;  // Categorical

  static Dimension uniform(std::string name, double lo, double hi);
  static Dimension log_uniform(std::string name, double lo, double hi);
  static Dimension int_step(std::string name, double lo, double hi, double step = 1.0);
  static Dimension categorical(std::string name, std::vector<std::string> choices);

  // Lattice size for IntStep, choice count for Categorical, 0 otherwise.
  std::size_t n_levels() const;
  // Value of level k (IntStep: lo + k*step; Categorical: k).
  double level_value(std::size_t k) const;
  std::size_t level_of(double value) const;
  bool contains(double value) const;
};

// Parameter values by dimension name. Categorical values hold the choice index.
using Params = std::map<std::string, double>;

struct SearchSpace {
  std::vector<Dimension> dims;

  // Throws EmptySpace when there are no dimensions, ConfigInvalid on bad bounds.
  void validate() const;
  bool contains(const Params& p) const;
  const Dimension* find(std::string_view name) const;
};

// Tuning ranges for the two members, each restricted to the knobs its growth
// strategy honours, plus the blend weight.
SearchSpace depthwise_space();
SearchSpace leafwise_space();
SearchSpace alpha_space();
// Both members (keys prefixed "a." and "b.") and alpha in one space.
SearchSpace joint_space(const SearchSpace& a, const SearchSpace& b);
// Smaller round counts and a higher learning-rate range for quick runs.
SearchSpace desk_depthwise_space();
SearchSpace desk_leafwise_space();

enum class TrialState { Complete, Pruned, Failed };
std::string_view state_name(TrialState s);

struct Trial {
  int id = 0;
  Params params;
  double objective = 0.0;
  TrialState state = TrialState::Complete;
  double duration_s = 0.0;
  std::string error;
};

struct TpeConfig {
  int n_startup = 10;
  double gamma = 0.25;  // fraction of completed trials forming the good set
  int n_candidates = 24;
  double bandwidth_floor = 0.01;  // fraction of the transformed range
  bool record_duration = true;
};

using Objective = std::function<double(const Params&)>;

// Sequential TPE optimizer. Suggestions for trial t depend only on the seed,
// t and the history of earlier trials, so a resumed study replays an
// uninterrupted one exactly.
class Study {
 public:
  Study(SearchSpace space, std::uint64_t seed, TpeConfig cfg = {});

  const SearchSpace& space() const noexcept { return space_; }
  const std::vector<Trial>& trials() const noexcept { return trials_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const TpeConfig& config() const noexcept { return cfg_; }

  Params suggest() const;
  // Draws from the startup sampler regardless of history.
  Params sample_prior(int trial_id) const;

  void tell(Trial trial);

  // Runs exactly n_trials more trials. Objective exceptions and non-finite
  // values become failed trials. Appends each trial to `journal` when set.
  // Returns the best complete trial (nullopt if none completed).
  std::optional<Trial> optimize(const Objective& objective, int n_trials,
                                const std::optional<std::filesystem::path>& journal = std::nullopt);

  // Highest objective among complete trials; ties go to the lowest id.
  std::optional<Trial> best() const;

  // Replaces the history with the trials in a journal file.
  void load_journal(const std::filesystem::path& path);

 private:
  SearchSpace space_;
  std::uint64_t seed_;
  TpeConfig cfg_;
  std::vector<Trial> trials_;
};

// Journal: one JSON object per line {id, params, objective, state, duration_s}.
std::string trial_to_json(const Trial& trial, const SearchSpace& space);
Trial trial_from_json(std::string_view line, const SearchSpace& space);
void append_journal(const std::filesystem::path& path, const Trial& trial, const SearchSpace& space);
std::vector<Trial> read_journal(const std::filesystem::path& path, const SearchSpace& space);

// Copies recognised keys (optionally with a prefix such as "a.") onto a base
// config.
gbdt::GbdtConfig apply_params(gbdt::GbdtConfig base, const Params& params,
                              std::string_view prefix = {});
Params params_from_config(const gbdt::GbdtConfig& cfg, const SearchSpace& space);

// Fold assignment reused across every trial of a study.
struct CvFolds {
  std::vector<int> fold_of;
  int folds = 0;
};
CvFolds make_folds(std::span<const BehaviorClass> labels, int folds, std::uint64_t seed);

struct CvResult {
  Matrix oof_proba;                // out-of-fold class probabilities
  std::vector<double> fold_macro_f1;
  double mean_macro_f1 = 0.0;
};

// Trains one model per fold with class weights fitted on that fold's training
// rows and scores unweighted macro-F1 on the held-out rows.
CvResult cross_validate(const features::FeatureMatrix& data, const CvFolds& folds,
                        const gbdt::GbdtConfig& cfg);
double cv_objective(const features::FeatureMatrix& data, const CvFolds& folds,
                    const gbdt::GbdtConfig& cfg);

// Mean per-fold macro-F1 of alpha-blended out-of-fold probabilities.
double blended_cv_score(const Matrix& oof_a, const Matrix& oof_b, std::span<const BehaviorClass> labels,
                        const CvFolds& folds, double alpha);

}  // namespace physiodecode::tpe
