#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "physiodecode/error.hpp"
#include "physiodecode/pipeline.hpp"
#include "physiodecode/workflow.hpp"

namespace fs = std::filesystem;
using namespace physiodecode;

namespace {

struct Flags {
  std::optional<std::string> preset;
  std::optional<fs::path> config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> workdir;
  std::optional<fs::path> data;
  std::optional<std::size_t> elite_k;
  std::optional<int> trials;
  std::optional<int> folds;
  std::optional<std::string> alpha;
  std::optional<std::string> mask;
  std::string format = "json";
  bool resume = false;
  std::size_t top = 20;
};

// Precedence: preset, then config file, then --set overrides, then the
// dedicated flags.
workflow::StageOptions build_options(const Flags& f) {
  pipeline::RunConfig cfg;
  if (f.preset) cfg.set("preset", *f.preset);
  if (f.config_file) cfg = pipeline::load_config_file(*f.config_file, cfg);
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::ConfigInvalid, "--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.elite_k) cfg.elite_k = *f.elite_k;
  if (f.trials) cfg.trials = *f.trials;
  if (f.folds) cfg.folds = *f.folds;
  if (f.alpha) cfg.set("alpha", *f.alpha);
  cfg.validate();

  workflow::StageOptions opts;
  opts.config = cfg;
  opts.workdir = workflow::resolve_workdir(f.workdir);
  opts.data = f.data;
  opts.format = eval::parse_report_format(f.format);
  if (f.mask) opts.mask = features::ModalityMask::parse(*f.mask);
  opts.resume = f.resume;
  opts.top = f.top;
  return opts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal physiological driving-behaviour decoding pipeline"};
  app.require_subcommand(1);
  Flags f;

  app.add_option("--preset", f.preset, "Base configuration: full or desk")->check(CLI::IsMember({"full", "desk"}));
  app.add_option("--config", f.config_file, "Flat key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", f.overrides, "Override a configuration key (key=value), repeatable");
  app.add_option("--seed", f.seed, "Master random seed");
  app.add_option("--workdir", f.workdir, "Artifact directory (default: $PHYSIODECODE_WORKDIR)");
  app.add_option("--data", f.data, "Epoch file for extract (default: <workdir>/epochs.epb)");
  app.add_option("--elite-k", f.elite_k, "Number of SHAP-selected features");
  app.add_option("--trials", f.trials, "TPE trials per study");
  app.add_option("--folds", f.folds, "Cross-validation folds");
  app.add_option("--alpha", f.alpha, "Blend weight of the depth-wise member, or 'tuned'");
  app.add_option("--mask", f.mask, "Modality subset for ablate, e.g. eeg, emg+gsr, full");
  app.add_option("--format", f.format, "Report format: json, csv or text")
      ->check(CLI::IsMember({"json", "csv", "text"}));
  app.add_flag("--resume", f.resume, "Continue existing study journals in tune");
  app.add_option("--top", f.top, "Rows printed by explain");

  using Stage = std::function<std::string(const workflow::StageOptions&)>;
  const std::vector<std::tuple<const char*, const char*, Stage>> stages = {
      {"synth", "Generate a synthetic labelled epoch file", workflow::run_synth},
      {"extract", "Preprocess epochs, extract features, split and fit normalisation", workflow::run_extract},
      {"select", "Rank features by SHAP importance and keep the elite set", workflow::run_select},
      {"tune", "Tune both ensemble members and the blend weight", workflow::run_tune},
      {"train", "Train the soft-voting ensemble", workflow::run_train},
      {"evaluate", "Score the ensemble on the held-out split", workflow::run_evaluate},
      {"ablate", "Modality ablation with the tuned configuration", workflow::run_ablate},
      {"explain", "SHAP importance of the trained ensemble", workflow::run_explain},
  };
  Stage selected;
  for (const auto& [name, help, fn] : stages) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    sub->callback([&selected, fn = fn] { selected = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const auto opts = build_options(f);
    std::cout << selected(opts);
    std::cout.flush();
    return 0;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return workflow::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
