#include "physiodecode/workflow.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "physiodecode/dataset.hpp"
#include "physiodecode/ensemble.hpp"
#include "physiodecode/shap.hpp"

namespace physiodecode::workflow {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

WorkdirLock::WorkdirLock(const fs::path& workdir) : path_(workdir / ".lock") {
  fs::create_directories(workdir);
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (f == nullptr)
    throw Error(ErrorKind::Io, "workdir " + workdir.string() +
                                   " is locked by another run (remove .lock if it is stale)");
  std::fclose(f);
}

WorkdirLock::~WorkdirLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

fs::path resolve_workdir(const std::optional<fs::path>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("PHYSIODECODE_WORKDIR"); env != nullptr && *env != '\0') return env;
  return "physiodecode_work";
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigInvalid:
    case ErrorKind::EmptyMask:
    case ErrorKind::EmptySpace:
    case ErrorKind::InvalidBand:
    case ErrorKind::UnsupportedRatio: return 2;
    case ErrorKind::MissingArtifact: return 3;
    default: return 4;
  }
}

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
}

fs::path require(const fs::path& workdir, const char* name, std::string_view stage) {
  auto path = workdir / name;
  if (!fs::exists(path))
    throw Error(ErrorKind::MissingArtifact, "missing " + std::string(name) + " in " + workdir.string() +
                                                "; run the '" + std::string(stage) + "' stage first");
  return path;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Records what a stage consumed and produced. Only created_at varies between
// identical reruns.
void write_manifest(const StageOptions& opts, std::string_view stage, const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs) {
  ordered_json j;
  j["schema_version"] = 1;
  j["stage"] = stage;
  j["seed"] = opts.config.seed;
  j["config_hash"] = pipeline::config_hash(opts.config);
  j["config"] = opts.config.to_text();
  ordered_json in = ordered_json::object(), out = ordered_json::object();
  for (const auto& p : inputs) in[p.filename().string()] = pipeline::file_hash(p);
  for (const auto& p : outputs) out[p.filename().string()] = pipeline::file_hash(p);
  j["inputs"] = std::move(in);
  j["outputs"] = std::move(out);
  j["created_at"] = utc_timestamp();
  write_text(opts.workdir / ("manifest_" + std::string(stage) + ".json"), j.dump(2) + "\n");
}

// Adds the producing config hash to a JSON document.
std::string stamp(std::string_view json_text, std::string_view hash, int indent = -1) {
  auto j = ordered_json::parse(json_text);
  j["config_hash"] = hash;
  return j.dump(indent) + "\n";
}

std::string split_to_json(const DatasetSplit& s, std::string_view hash) {
  ordered_json j;
  j["schema_version"] = 1;
  j["config_hash"] = hash;
  j["seed"] = s.seed;
  j["test_fraction"] = s.test_fraction;
  j["train"] = s.train_indices;
  j["test"] = s.test_indices;
  return j.dump() + "\n";
}

DatasetSplit split_from_json(std::string_view text, std::size_t n_rows) {
  try {
    const auto j = ordered_json::parse(text);
    if (j.value("schema_version", -1) != 1)
      throw Error(ErrorKind::SchemaVersionMismatch, "split schema_version must be 1");
    DatasetSplit s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.test_fraction = j.at("test_fraction").get<double>();
    s.train_indices = j.at("train").get<std::vector<std::size_t>>();
    s.test_indices = j.at("test").get<std::vector<std::size_t>>();
    for (const auto* part : {&s.train_indices, &s.test_indices})
      for (auto i : *part)
        if (i >= n_rows) throw Error(ErrorKind::LengthMismatch, "split index beyond the feature table");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaVersionMismatch, std::string("malformed split: ") + e.what());
  }
}

struct Loaded {
  features::FeatureMatrix all;
  pipeline::PreparedData data;
  std::vector<fs::path> inputs;
};

Loaded load_prepared(const StageOptions& opts) {
  Loaded l;
  const auto features_path = require(opts.workdir, artifact::kFeatures, "extract");
  const auto split_path = require(opts.workdir, artifact::kSplit, "extract");
  const auto norm_path = require(opts.workdir, artifact::kNormStats, "extract");
  l.all = features::read_feature_csv(features_path);
  l.data.split = split_from_json(read_text(split_path), l.all.rows());
  l.data.norm = features::norm_stats_from_json(read_text(norm_path));
  l.data.train = features::apply_norm(features::select_rows(l.all, l.data.split.train_indices), l.data.norm);
  l.data.test = features::apply_norm(features::select_rows(l.all, l.data.split.test_indices), l.data.norm);
  l.inputs = {features_path, split_path, norm_path};
  return l;
}

// Restricts both partitions to the elite list.
std::vector<std::string> apply_elite(Loaded& l, const StageOptions& opts) {
  const auto elite_path = require(opts.workdir, artifact::kElite, "select");
  auto names = shapx::read_elite_list(elite_path);
  l.data.train = features::select_columns(l.data.train, names);
  l.data.test = features::select_columns(l.data.test, names);
  l.inputs.push_back(elite_path);
  return names;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string shares_line(const shapx::ModalityShares& s) {
  return "EEG " + fmt("%.3f", s.eeg) + "  EMG " + fmt("%.3f", s.emg) + "  GSR " + fmt("%.3f", s.gsr);
}

}  // namespace

std::string run_synth(const StageOptions& opts) {
  opts.config.validate();
  WorkdirLock lock(opts.workdir);
  SyntheticConfig sc;
  sc.n_per_class = opts.config.synth_per_class;
  sc.seed = opts.config.seed;
  const auto layout = ModalityLayout::canonical();
  const auto epochs = generate_synthetic(sc, layout);
  const auto epb = opts.workdir / artifact::kEpochs;
  const auto manifest = opts.workdir / artifact::kEpochManifest;
  write_epochs(epb, epochs);
  write_manifest_csv(manifest, epochs);
  write_manifest(opts, "synth", {}, {epb, manifest});
  return "wrote " + std::to_string(epochs.size()) + " synthetic epochs to " + epb.string();
}

std::string run_extract(const StageOptions& opts) {
  opts.config.validate();
  WorkdirLock lock(opts.workdir);
  const auto data = opts.data ? *opts.data : opts.workdir / artifact::kEpochs;
  if (!fs::exists(data))
    throw Error(ErrorKind::MissingArtifact,
                "missing epoch file " + data.string() + "; run the 'synth' stage first or pass --data");
  const auto layout = ModalityLayout::canonical();
  const auto epochs = read_epochs(data, layout);
  const auto extracted = pipeline::extract_features(epochs, layout, opts.config);
  const auto hash = pipeline::config_hash(opts.config);
  const auto prepared = pipeline::prepare(extracted.features, opts.config);

  const auto features_path = opts.workdir / artifact::kFeatures;
  const auto split_path = opts.workdir / artifact::kSplit;
  const auto norm_path = opts.workdir / artifact::kNormStats;
  features::write_feature_csv(features_path, extracted.features);
  write_text(split_path, split_to_json(prepared.split, hash));
  write_text(norm_path, features::norm_stats_to_json(prepared.norm, hash));
  write_manifest(opts, "extract", {data}, {features_path, split_path, norm_path});
  return "extracted " + std::to_string(extracted.features.rows()) + " epochs x " +
         std::to_string(extracted.features.cols()) + " features (" + std::to_string(extracted.dropped.size()) +
         " dropped for bad channels); train " + std::to_string(prepared.split.train_indices.size()) +
         ", test " + std::to_string(prepared.split.test_indices.size());
}

std::string run_select(const StageOptions& opts) {
  opts.config.validate();
  WorkdirLock lock(opts.workdir);
  auto l = load_prepared(opts);
  const auto sel = shapx::select_features(l.data.train, opts.config.elite_k, opts.config.selector());
  const auto importance_path = opts.workdir / artifact::kImportance;
  const auto elite_path = opts.workdir / artifact::kElite;
  shapx::write_importance_csv(importance_path, sel.importance);
  shapx::write_elite_list(elite_path, sel.elite_names);
  write_manifest(opts, "select", l.inputs, {importance_path, elite_path});
  return "selected " + std::to_string(sel.elite_names.size()) + " of " + std::to_string(l.data.train.cols()) +
         " features; importance share " + shares_line(shapx::modality_decomposition(sel.importance));
}

std::string run_tune(const StageOptions& opts) {
  opts.config.validate();
  WorkdirLock lock(opts.workdir);
  auto l = load_prepared(opts);
  apply_elite(l, opts);
  const auto tuned = pipeline::tune(l.data.train, opts.config, opts.workdir, opts.resume);
  const auto tuned_path = opts.workdir / artifact::kTuned;
  write_text(tuned_path, pipeline::tuned_to_json(tuned, pipeline::config_hash(opts.config)));
  std::vector<fs::path> outputs{tuned_path};
  for (const char* j : {"study_a.jsonl", "study_b.jsonl", "study_alpha.jsonl", "study_joint.jsonl"})
    if (fs::exists(opts.workdir / j)) outputs.push_back(opts.workdir / j);
  write_manifest(opts, "tune", l.inputs, outputs);
  return "tuned members: cv macro-F1 depth-wise " + fmt("%.4f", tuned.cv_score_a) + ", leaf-wise " +
         fmt("%.4f", tuned.cv_score_b) + ", blend " + fmt("%.4f", tuned.cv_score_blend) + " at alpha " +
         fmt("%.4f", tuned.alpha);
}

std::string run_train(const StageOptions& opts) {
  opts.config.validate();
  WorkdirLock lock(opts.workdir);
  auto l = load_prepared(opts);
  apply_elite(l, opts);
  const auto tuned_path = require(opts.workdir, artifact::kTuned, "tune");
  l.inputs.push_back(tuned_path);
  auto tuned = pipeline::tuned_from_json(read_text(tuned_path));
  if (opts.config.fixed_alpha) tuned.alpha = *opts.config.fixed_alpha;
  const auto model = pipeline::train_ensemble(l.data.train, tuned);
  const auto hash = pipeline::config_hash(opts.config);
  const auto ens_path = opts.workdir / artifact::kEnsemble;
  const auto a_path = opts.workdir / artifact::kModelA;
  const auto b_path = opts.workdir / artifact::kModelB;
  write_text(ens_path, stamp(ensemble::to_json(model), hash));
  write_text(a_path, stamp(gbdt::to_json(model.member_a), hash));
  write_text(b_path, stamp(gbdt::to_json(model.member_b), hash));
  write_manifest(opts, "train", l.inputs, {ens_path, a_path, b_path});
  return "trained ensemble on " + std::to_string(l.data.train.rows()) + " rows (" +
         std::to_string(model.member_a.n_rounds()) + " + " + std::to_string(model.member_b.n_rounds()) +
         " rounds, alpha " + fmt("%.4f", model.alpha) + ")";
}

namespace {

ensemble::EnsembleModel load_ensemble(const StageOptions& opts, std::vector<fs::path>& inputs) {
  const auto path = require(opts.workdir, artifact::kEnsemble, "train");
  inputs.push_back(path);
  return ensemble::from_json(read_text(path));
}

}  // namespace

std::string run_evaluate(const StageOptions& opts) {
  opts.config.validate();
  WorkdirLock lock(opts.workdir);
  std::vector<fs::path> pre_inputs;
  const auto model = load_ensemble(opts, pre_inputs);
  auto l = load_prepared(opts);
  apply_elite(l, opts);
  l.inputs.insert(l.inputs.end(), pre_inputs.begin(), pre_inputs.end());
  const auto report = pipeline::evaluate_ensemble(model, l.data.test);
  const auto hash = pipeline::config_hash(opts.config);

  const auto json_path = opts.workdir / (std::string(artifact::kReport) + ".json");
  write_text(json_path, eval::emit_report(report, eval::ReportFormat::Json, hash));
  std::vector<fs::path> outputs{json_path};
  if (opts.format == eval::ReportFormat::Csv) {
    outputs.push_back(opts.workdir / (std::string(artifact::kReport) + ".csv"));
    write_text(outputs.back(), eval::emit_report(report, eval::ReportFormat::Csv));
  } else if (opts.format == eval::ReportFormat::Text) {
    outputs.push_back(opts.workdir / (std::string(artifact::kReport) + ".txt"));
    write_text(outputs.back(), eval::emit_report(report, eval::ReportFormat::Text));
  }
  write_manifest(opts, "evaluate", l.inputs, outputs);
  return eval::emit_report(report, opts.format, hash);
}

std::string run_ablate(const StageOptions& opts) {
  opts.config.validate();
  WorkdirLock lock(opts.workdir);
  const auto features_path = require(opts.workdir, artifact::kFeatures, "extract");
  const auto tuned_path = require(opts.workdir, artifact::kTuned, "tune");
  const auto all = features::read_feature_csv(features_path);
  auto tuned = pipeline::tuned_from_json(read_text(tuned_path));
  if (opts.config.fixed_alpha) tuned.alpha = *opts.config.fixed_alpha;
  std::vector<features::ModalityMask> masks;
  if (opts.mask)
    masks.push_back(*opts.mask);
  else
    masks = features::canonical_masks();
  const auto rows = pipeline::run_ablation(all, masks, opts.config, tuned);
  const auto csv = pipeline::ablation_csv(rows);
  const auto out = opts.workdir / artifact::kAblation;
  write_text(out, csv);
  write_manifest(opts, "ablate", {features_path, tuned_path}, {out});
  return csv;
}

std::string run_explain(const StageOptions& opts) {
  opts.config.validate();
  WorkdirLock lock(opts.workdir);
  std::vector<fs::path> pre_inputs;
  const auto model = load_ensemble(opts, pre_inputs);
  auto l = load_prepared(opts);
  const auto names = apply_elite(l, opts);
  l.inputs.insert(l.inputs.end(), pre_inputs.begin(), pre_inputs.end());
  if (model.member_a.feature_names != names)
    throw Error(ErrorKind::RegistryMismatch, "ensemble was trained on a different elite list");

  // Member importances on the held-out rows, weighted like the vote.
  const auto ia = shapx::aggregate_importance(shapx::tree_shap(model.member_a, l.data.test.values));
  const auto ib = shapx::aggregate_importance(shapx::tree_shap(model.member_b, l.data.test.values));
  std::vector<double> blended(ia.size());
  for (std::size_t j = 0; j < ia.size(); ++j) blended[j] = model.alpha * ia[j] + (1.0 - model.alpha) * ib[j];
  const auto iv = shapx::rank_importance(std::move(blended), names, opts.top);
  const auto out = opts.workdir / artifact::kExplain;
  shapx::write_importance_csv(out, iv);
  write_manifest(opts, "explain", l.inputs, {out});

  std::ostringstream s;
  s << "importance share: " << shares_line(shapx::modality_decomposition(iv)) << '\n';
  for (std::size_t r = 0; r < iv.elite.size(); ++r) {
    const auto j = iv.elite[r];
    char line[160];
    std::snprintf(line, sizeof line, "%4zu  %-40s %.6f\n", r + 1, iv.feature_names[j].c_str(), iv.importance[j]);
    s << line;
  }
  return s.str();
}

}  // namespace physiodecode::workflow
