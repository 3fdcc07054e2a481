#include "physiodecode/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "physiodecode/error.hpp"
#include "physiodecode/parallel.hpp"
#include "physiodecode/rng.hpp"

namespace physiodecode::pipeline {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kSelectorStream = 0x5e1;
constexpr std::uint64_t kMemberAStream = 0xa;
constexpr std::uint64_t kMemberBStream = 0xb;
constexpr std::uint64_t kFoldStream = 0xf0;
constexpr std::uint64_t kStudyStream = 0x57;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorKind::ConfigInvalid,
              "invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

gbdt::SplitMode parse_split_mode(std::string_view v) {
  if (v == "auto") return gbdt::SplitMode::Auto;
  if (v == "exact") return gbdt::SplitMode::Exact;
  if (v == "histogram") return gbdt::SplitMode::Histogram;
  bad_value("split_mode", v);
}

const char* split_mode_name(gbdt::SplitMode m) {
  switch (m) {
    case gbdt::SplitMode::Exact: return "exact";
    case gbdt::SplitMode::Histogram: return "histogram";
    default: return "auto";
  }
}

Preset parse_preset(std::string_view v) {
  if (v == "full") return Preset::Full;
  if (v == "desk") return Preset::Desk;
  bad_value("preset", v);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

RunConfig RunConfig::defaults(Preset preset) {
  RunConfig c;
  c.preset = preset;
  if (preset == Preset::Desk) {
    c.trials = 10;
    c.folds = 3;
    c.selector_rounds = 60;
    c.selector_depth = 4;
    c.selector_learning_rate = 0.15;
    c.split_mode = gbdt::SplitMode::Histogram;
    c.max_bins = 64;
  }
  return c;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  if (key == "preset") {
    *this = defaults(parse_preset(value));
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "test_fraction") {
    test_fraction = parse_number<double>(key, value);
  } else if (key == "elite_k") {
    elite_k = parse_number<std::size_t>(key, value);
  } else if (key == "trials") {
    trials = parse_number<int>(key, value);
  } else if (key == "folds") {
    folds = parse_number<int>(key, value);
  } else if (key == "per_subject_norm") {
    per_subject_norm = parse_bool(key, value);
  } else if (key == "bad_channel_z") {
    bad_channel_z = parse_number<double>(key, value);
  } else if (key == "flat_eps") {
    flat_eps = parse_number<double>(key, value);
  } else if (key == "drop_bad_epochs") {
    drop_bad_epochs = parse_bool(key, value);
  } else if (key == "alpha") {
    if (value == "tuned")
      fixed_alpha.reset();
    else
      fixed_alpha = parse_number<double>(key, value);
  } else if (key == "joint_search") {
    joint_search = parse_bool(key, value);
  } else if (key == "resample_folds") {
    resample_folds = parse_bool(key, value);
  } else if (key == "selector_rounds") {
    selector_rounds = parse_number<int>(key, value);
  } else if (key == "selector_depth") {
    selector_depth = parse_number<int>(key, value);
  } else if (key == "selector_learning_rate") {
    selector_learning_rate = parse_number<double>(key, value);
  } else if (key == "split_mode") {
    split_mode = parse_split_mode(value);
  } else if (key == "max_bins") {
    max_bins = parse_number<int>(key, value);
  } else if (key == "tpe_startup") {
    tpe.n_startup = parse_number<int>(key, value);
  } else if (key == "tpe_gamma") {
    tpe.gamma = parse_number<double>(key, value);
  } else if (key == "tpe_candidates") {
    tpe.n_candidates = parse_number<int>(key, value);
  } else if (key == "record_duration") {
    tpe.record_duration = parse_bool(key, value);
  } else if (key == "welch_segment") {
    extractor.welch.segment_len = parse_number<std::size_t>(key, value);
  } else if (key == "welch_overlap") {
    extractor.welch.overlap = parse_number<double>(key, value);
  } else if (key == "synth_per_class") {
    synth_per_class = parse_number<std::size_t>(key, value);
  } else {
    throw Error(ErrorKind::ConfigInvalid, "unknown config key '" + std::string(key) + "'");
  }
}

void RunConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw Error(ErrorKind::ConfigInvalid, msg); };
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail("test_fraction must lie in (0, 1)");
  if (elite_k < 1) fail("elite_k must be >= 1");
  if (trials < 1) fail("trials must be >= 1");
  if (folds < 2) fail("folds must be >= 2");
  if (fixed_alpha && !(*fixed_alpha >= 0.0 && *fixed_alpha <= 1.0)) fail("alpha must lie in [0, 1]");
  if (selector_rounds < 1 || selector_depth < 1 || !(selector_learning_rate > 0.0))
    fail("selector settings must be positive");
  if (max_bins < 2 || max_bins > 256) fail("max_bins must lie in [2, 256]");
  if (!(tpe.gamma > 0.0 && tpe.gamma < 1.0) || tpe.n_candidates < 1 || tpe.n_startup < 0)
    fail("invalid TPE settings");
  if (!(extractor.welch.overlap >= 0.0 && extractor.welch.overlap < 1.0)) fail("welch_overlap must lie in [0, 1)");
}

std::string RunConfig::to_text() const {
  std::ostringstream o;
  o << "preset = " << (preset == Preset::Desk ? "desk" : "full") << '\n'
    << "seed = " << seed << '\n'
    << "test_fraction = " << num(test_fraction) << '\n'
    << "elite_k = " << elite_k << '\n'
    << "trials = " << trials << '\n'
    << "folds = " << folds << '\n'
    << "per_subject_norm = " << (per_subject_norm ? "true" : "false") << '\n'
    << "bad_channel_z = " << num(bad_channel_z) << '\n'
    << "flat_eps = " << num(flat_eps) << '\n'
    << "drop_bad_epochs = " << (drop_bad_epochs ? "true" : "false") << '\n'
    << "alpha = " << (fixed_alpha ? num(*fixed_alpha) : std::string("tuned")) << '\n'
    << "joint_search = " << (joint_search ? "true" : "false") << '\n'
    << "resample_folds = " << (resample_folds ? "true" : "false") << '\n'
    << "selector_rounds = " << selector_rounds << '\n'
    << "selector_depth = " << selector_depth << '\n'
    << "selector_learning_rate = " << num(selector_learning_rate) << '\n'
    << "split_mode = " << split_mode_name(split_mode) << '\n'
    << "max_bins = " << max_bins << '\n'
    << "tpe_startup = " << tpe.n_startup << '\n'
    << "tpe_gamma = " << num(tpe.gamma) << '\n'
    << "tpe_candidates = " << tpe.n_candidates << '\n'
    << "record_duration = " << (tpe.record_duration ? "true" : "false") << '\n'
    << "welch_segment = " << extractor.welch.segment_len << '\n'
    << "welch_overlap = " << num(extractor.welch.overlap) << '\n'
    << "synth_per_class = " << synth_per_class << '\n';
  return o.str();
}

gbdt::GbdtConfig RunConfig::selector() const {
  auto c = shapx::selector_config(derive_seed(seed, {kSelectorStream}));
  c.n_estimators = selector_rounds;
  c.max_depth = selector_depth;
  c.learning_rate = selector_learning_rate;
  c.split_mode = split_mode;
  c.max_bins = max_bins;
  return c;
}

gbdt::GbdtConfig RunConfig::base_member_a() const {
  gbdt::GbdtConfig c;
  c.growth = gbdt::Growth::DepthWise;
  c.seed = derive_seed(seed, {kMemberAStream});
  c.split_mode = split_mode;
  c.max_bins = max_bins;
  return c;
}

gbdt::GbdtConfig RunConfig::base_member_b() const {
  gbdt::GbdtConfig c;
  c.growth = gbdt::Growth::LeafWise;
  c.seed = derive_seed(seed, {kMemberBStream});
  c.split_mode = split_mode;
  c.max_bins = max_bins;
  return c;
}

tpe::SearchSpace RunConfig::space_a() const {
  return preset == Preset::Desk ? tpe::desk_depthwise_space() : tpe::depthwise_space();
}

tpe::SearchSpace RunConfig::space_b() const {
  return preset == Preset::Desk ? tpe::desk_leafwise_space() : tpe::leafwise_space();
}

RunConfig parse_config_text(std::string_view text, RunConfig base) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::ConfigInvalid, "config line " + std::to_string(line_no) + " lacks '='");
    entries.emplace_back(trim(std::string_view(body).substr(0, eq)),
                         trim(std::string_view(body).substr(eq + 1)));
  }
  // The preset resets everything else, so it is applied first.
  for (const auto& [k, v] : entries)
    if (k == "preset") base.set(k, v);
  for (const auto& [k, v] : entries)
    if (k != "preset") base.set(k, v);
  return base;
}

RunConfig load_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const RunConfig& cfg) { return fnv1a_hex(cfg.to_text()); }

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingArtifact, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

// ---------------------------------------------------------------------------
// Stages

ExtractResult extract_features(std::span<const Epoch> epochs, const ModalityLayout& layout,
                               const RunConfig& cfg) {
  const features::FeatureExtractor extractor(layout, cfg.extractor);
  const std::size_t p = extractor.registry().size();
  std::vector<double> values(epochs.size() * p);
  std::vector<char> bad(epochs.size(), 0);
  parallel_for(epochs.size(), [&](std::size_t i) {
    const Epoch clean = dsp::preprocess(epochs[i], layout, cfg.preprocess);
    if (cfg.drop_bad_epochs && !dsp::detect_bad_channels(clean, layout, cfg.bad_channel_z, cfg.flat_eps).empty()) {
      bad[i] = 1;
      return;
    }
    extractor.extract_into(clean, std::span<double>(values.data() + i * p, p));
  });

  ExtractResult out;
  for (std::size_t i = 0; i < epochs.size(); ++i) (bad[i] ? out.dropped : out.kept).push_back(i);
  auto& fm = out.features;
  fm.registry = extractor.registry();
  fm.values = Matrix(out.kept.size(), p);
  for (std::size_t r = 0; r < out.kept.size(); ++r) {
    const auto i = out.kept[r];
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(i * p), p, fm.values.row(r).begin());
    fm.labels.push_back(epochs[i].label);
    fm.subject_ids.push_back(epochs[i].subject_id);
  }
  return out;
}

PreparedData prepare(const features::FeatureMatrix& all, const RunConfig& cfg) {
  return prepare(all, stratified_split(all.labels, cfg.test_fraction, cfg.seed), cfg);
}

PreparedData prepare(const features::FeatureMatrix& all, const DatasetSplit& split, const RunConfig& cfg) {
  PreparedData d;
  d.split = split;
  d.norm = features::fit_norm(all, cfg.per_subject_norm, split.train_indices);
  d.train = features::apply_norm(features::select_rows(all, split.train_indices), d.norm);
  d.test = features::apply_norm(features::select_rows(all, split.test_indices), d.norm);
  return d;
}

namespace {

struct StudyRun {
  std::optional<tpe::Trial> best;
  Matrix best_oof;
  tpe::CvFolds best_folds;
};

std::optional<std::filesystem::path> journal_path(const std::optional<std::filesystem::path>& dir,
                                                  const char* name, bool resume) {
  if (!dir) return std::nullopt;
  auto path = *dir / name;
  if (!resume) std::filesystem::remove(path);
  return path;
}

// Runs the remaining trials of a single-member study and returns the best
// trial with its out-of-fold probabilities.
StudyRun run_member_study(const features::FeatureMatrix& train, const RunConfig& cfg,
                          const tpe::SearchSpace& space, const gbdt::GbdtConfig& base,
                          std::uint64_t stream, const std::optional<std::filesystem::path>& journal) {
  tpe::Study study(space, derive_seed(cfg.seed, {kStudyStream, stream}), cfg.tpe);
  if (journal && std::filesystem::exists(*journal)) study.load_journal(*journal);
  const auto fixed_folds = tpe::make_folds(train.labels, cfg.folds, derive_seed(cfg.seed, {kFoldStream}));

  const auto folds_for = [&](int trial_id) {
    if (!cfg.resample_folds) return fixed_folds;
    return tpe::make_folds(train.labels, cfg.folds,
                           derive_seed(cfg.seed, {kFoldStream, stream, static_cast<std::uint64_t>(trial_id)}));
  };

  StudyRun run;
  std::map<int, std::pair<Matrix, tpe::CvFolds>> cache;
  double best_seen = -1.0;
  int next_id = static_cast<int>(study.trials().size());
  const auto objective = [&](const tpe::Params& params) {
    const int id = next_id++;
    const auto folds = folds_for(id);
    auto result = tpe::cross_validate(train, folds, tpe::apply_params(base, params));
    if (result.mean_macro_f1 > best_seen) {
      best_seen = result.mean_macro_f1;
      cache.clear();
      cache.emplace(id, std::make_pair(std::move(result.oof_proba), folds));
    }
    return result.mean_macro_f1;
  };
  const int remaining = std::max(0, cfg.trials - static_cast<int>(study.trials().size()));
  run.best = study.optimize(objective, remaining, journal);
  if (!run.best) throw Error(ErrorKind::DegenerateData, "every tuning trial failed");

  if (const auto it = cache.find(run.best->id); it != cache.end()) {
    run.best_oof = std::move(it->second.first);
    run.best_folds = std::move(it->second.second);
  } else {
    run.best_folds = folds_for(run.best->id);
    run.best_oof = tpe::cross_validate(train, run.best_folds, tpe::apply_params(base, run.best->params)).oof_proba;
  }
  return run;
}

}  // namespace

TunedConfig tune(const features::FeatureMatrix& train, const RunConfig& cfg,
                 const std::optional<std::filesystem::path>& journal_dir, bool resume) {
  cfg.validate();
  TunedConfig tuned;
  const auto base_a = cfg.base_member_a();
  const auto base_b = cfg.base_member_b();

  if (cfg.joint_search) {
    const auto space = tpe::joint_space(cfg.space_a(), cfg.space_b());
    tpe::Study study(space, derive_seed(cfg.seed, {kStudyStream, 3}), cfg.tpe);
    const auto journal = journal_path(journal_dir, "study_joint.jsonl", resume);
    if (journal && std::filesystem::exists(*journal)) study.load_journal(*journal);
    const auto folds = tpe::make_folds(train.labels, cfg.folds, derive_seed(cfg.seed, {kFoldStream}));
    const auto objective = [&](const tpe::Params& p) {
      const auto a = tpe::cross_validate(train, folds, tpe::apply_params(base_a, p, "a."));
      const auto b = tpe::cross_validate(train, folds, tpe::apply_params(base_b, p, "b."));
      const double alpha = cfg.fixed_alpha.value_or(p.at("alpha"));
      return tpe::blended_cv_score(a.oof_proba, b.oof_proba, train.labels, folds, alpha);
    };
    const int remaining = std::max(0, cfg.trials - static_cast<int>(study.trials().size()));
    const auto best = study.optimize(objective, remaining, journal);
    if (!best) throw Error(ErrorKind::DegenerateData, "every tuning trial failed");
    tuned.member_a = tpe::apply_params(base_a, best->params, "a.");
    tuned.member_b = tpe::apply_params(base_b, best->params, "b.");
    tuned.alpha = cfg.fixed_alpha.value_or(best->params.at("alpha"));
    tuned.cv_score_blend = best->objective;
    return tuned;
  }

  const auto a = run_member_study(train, cfg, cfg.space_a(), base_a, 1,
                                  journal_path(journal_dir, "study_a.jsonl", resume));
  const auto b = run_member_study(train, cfg, cfg.space_b(), base_b, 2,
                                  journal_path(journal_dir, "study_b.jsonl", resume));
  tuned.member_a = tpe::apply_params(base_a, a.best->params);
  tuned.member_b = tpe::apply_params(base_b, b.best->params);
  tuned.cv_score_a = a.best->objective;
  tuned.cv_score_b = b.best->objective;

  if (cfg.fixed_alpha) {
    tuned.alpha = *cfg.fixed_alpha;
    tuned.cv_score_blend = tpe::blended_cv_score(a.best_oof, b.best_oof, train.labels, a.best_folds, tuned.alpha);
    return tuned;
  }
  tpe::Study study(tpe::alpha_space(), derive_seed(cfg.seed, {kStudyStream, 4}), cfg.tpe);
  const auto journal = journal_path(journal_dir, "study_alpha.jsonl", resume);
  if (journal && std::filesystem::exists(*journal)) study.load_journal(*journal);
  const auto objective = [&](const tpe::Params& p) {
    return tpe::blended_cv_score(a.best_oof, b.best_oof, train.labels, a.best_folds, p.at("alpha"));
  };
  const int remaining = std::max(0, cfg.trials - static_cast<int>(study.trials().size()));
  const auto best = study.optimize(objective, remaining, journal);
  if (!best) throw Error(ErrorKind::DegenerateData, "every blend trial failed");
  tuned.alpha = best->params.at("alpha");
  tuned.cv_score_blend = best->objective;
  return tuned;
}

ensemble::EnsembleModel train_ensemble(const features::FeatureMatrix& train, const TunedConfig& tuned) {
  const auto weights = gbdt::sample_weights(train.labels, gbdt::class_weights(train.labels));
  ensemble::EnsembleModel ens;
  ens.alpha = tuned.alpha;
  ens.member_a = gbdt::train(train.values, train.labels, weights, tuned.member_a, train.registry.names());
  ens.member_b = gbdt::train(train.values, train.labels, weights, tuned.member_b, train.registry.names());
  ens.validate();
  return ens;
}

eval::EvalReport evaluate_ensemble(const ensemble::EnsembleModel& model, const features::FeatureMatrix& test) {
  if (test.registry.names() != model.member_a.feature_names)
    throw Error(ErrorKind::RegistryMismatch, "test features do not match the model registry");
  const auto pred = ensemble::predict(model, test.values);
  return eval::evaluate(test.labels, pred);
}

namespace {

// Elite selection on the training rows, then both partitions restricted to
// the elite columns.
void select_and_restrict(RunResult& r, const RunConfig& cfg) {
  r.selection = shapx::select_features(r.data.train, cfg.elite_k, cfg.selector());
  r.data.train = features::select_columns(r.data.train, r.selection.elite_names);
  r.data.test = features::select_columns(r.data.test, r.selection.elite_names);
}

}  // namespace

RunResult run(const features::FeatureMatrix& all, const RunConfig& cfg) {
  cfg.validate();
  RunResult r;
  r.data = prepare(all, cfg);
  select_and_restrict(r, cfg);
  r.tuned = tune(r.data.train, cfg);
  r.model = train_ensemble(r.data.train, r.tuned);
  r.report = evaluate_ensemble(r.model, r.data.test);
  return r;
}

RunResult run_fixed(const features::FeatureMatrix& all, const RunConfig& cfg, const TunedConfig& tuned,
                    features::ModalityMask mask) {
  if (mask.empty()) throw Error(ErrorKind::EmptyMask, "modality mask selects no modality");
  cfg.validate();
  const auto cols = features::columns_for(all.registry, mask);
  if (cols.empty()) throw Error(ErrorKind::EmptyMask, "mask " + mask.to_string() + " selects no features");
  RunResult r;
  r.data = prepare(features::select_columns(all, cols), cfg);
  select_and_restrict(r, cfg);
  r.tuned = tuned;
  r.model = train_ensemble(r.data.train, r.tuned);
  r.report = evaluate_ensemble(r.model, r.data.test);
  return r;
}

std::vector<AblationRow> run_ablation(const features::FeatureMatrix& all,
                                      std::span<const features::ModalityMask> masks,
                                      const RunConfig& cfg, const TunedConfig& tuned) {
  for (const auto& m : masks)
    if (m.empty()) throw Error(ErrorKind::EmptyMask, "modality mask selects no modality");
  std::vector<AblationRow> rows;
  for (const auto& m : masks) rows.push_back({m, run_fixed(all, cfg, tuned, m).report});
  return rows;
}

std::string ablation_csv(std::span<const AblationRow> rows) {
  std::optional<double> full;
  for (const auto& r : rows)
    if (r.mask == features::ModalityMask::full()) full = r.report.accuracy;
  std::ostringstream o;
  o << "mask,accuracy,macro_f1,gap_vs_full\n";
  char buf[96];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.4f,%.4f,", r.report.accuracy, r.report.macro_f1);
    o << r.mask.to_string() << ',' << buf;
    if (full) {
      std::snprintf(buf, sizeof buf, "%.4f", *full - r.report.accuracy);
      o << buf;
    }
    o << '\n';
  }
  return o.str();
}

std::string tuned_to_json(const TunedConfig& t, std::string_view hash) {
  ordered_json j;
  j["schema_version"] = 1;
  if (!hash.empty()) j["config_hash"] = hash;
  j["alpha"] = t.alpha;
  j["member_a"] = ordered_json::parse(gbdt::config_to_json(t.member_a));
  j["member_b"] = ordered_json::parse(gbdt::config_to_json(t.member_b));
  j["cv_score_a"] = t.cv_score_a;
  j["cv_score_b"] = t.cv_score_b;
  j["cv_score_blend"] = t.cv_score_blend;
  return j.dump(2) + "\n";
}

TunedConfig tuned_from_json(std::string_view text) {
  try {
    const auto j = ordered_json::parse(text);
    if (j.value("schema_version", -1) != 1)
      throw Error(ErrorKind::SchemaVersionMismatch, "tuned config schema_version must be 1");
    TunedConfig t;
    t.alpha = j.at("alpha").get<double>();
    t.member_a = gbdt::config_from_json(j.at("member_a").dump());
    t.member_b = gbdt::config_from_json(j.at("member_b").dump());
    t.cv_score_a = j.value("cv_score_a", 0.0);
    t.cv_score_b = j.value("cv_score_b", 0.0);
    t.cv_score_blend = j.value("cv_score_blend", 0.0);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaVersionMismatch, std::string("malformed tuned config: ") + e.what());
  }
}

}  // namespace physiodecode::pipeline
