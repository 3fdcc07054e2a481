#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli(const std::string& args, const std::string& env = {}) {
  const auto tmp = fs::temp_directory_path();
  const auto out = tmp / "physiodecode_cli_stdout.txt";
  const auto err = tmp / "physiodecode_cli_stderr.txt";
  const std::string cmd =
      env + " \"" PHYSIODECODE_CLI "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kCommon = "--preset desk --seed 7 --set synth_per_class=40 --set record_duration=false "
                      "--set selector_rounds=20 --elite-k 40 --trials 3 --folds 2";

void full_run(const fs::path& dir) {
  const std::string base = std::string(kCommon) + " --workdir \"" + dir.string() + "\" ";
  for (const char* stage : {"synth", "extract", "select", "tune", "train"}) {
    const auto r = cli(base + stage);
    REQUIRE_MESSAGE(r.code == 0, stage, ": ", r.err);
  }
  const auto eval = cli(base + "evaluate --format text");
  REQUIRE_MESSAGE(eval.code == 0, eval.err);
  CHECK(eval.out.find("Accuracy") != std::string::npos);
  const auto ablate = cli(base + "ablate --mask eeg");
  REQUIRE_MESSAGE(ablate.code == 0, ablate.err);
  CHECK(ablate.out.rfind("mask,accuracy,macro_f1,gap_vs_full", 0) == 0);
  const auto explain = cli(base + "explain --top 5");
  REQUIRE_MESSAGE(explain.code == 0, explain.err);
}

// Manifest contents without the wall-clock timestamp.
std::string manifest_body(const fs::path& p) {
  auto j = nlohmann::ordered_json::parse(slurp(p));
  j.erase("created_at");
  return j.dump();
}

}  // namespace

TEST_CASE("end-to-end run, reproducibility and artifact stamps") {
  const auto a = fresh_dir("physiodecode_cli_a");
  const auto b = fresh_dir("physiodecode_cli_b");
  full_run(a);
  full_run(b);

  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename().string();
    if (name.rfind(".lock", 0) == 0 || !entry.is_regular_file()) continue;
    REQUIRE_MESSAGE(fs::exists(b / name), name);
    if (name.rfind("manifest_", 0) == 0)
      CHECK_MESSAGE(manifest_body(entry.path()) == manifest_body(b / name), name);
    else
      CHECK_MESSAGE(slurp(entry.path()) == slurp(b / name), name);
    ++compared;
  }
  CHECK(compared >= 20);

  const auto manifest = nlohmann::json::parse(slurp(a / "manifest_train.json"));
  const auto hash = manifest.at("config_hash").get<std::string>();
  CHECK(hash.size() == 16);
  for (const char* name : {"split.json", "norm_stats.json", "tuned.json", "ensemble.json", "model_a.json",
                           "model_b.json", "report.json"}) {
    const auto j = nlohmann::json::parse(slurp(a / name));
    CHECK_MESSAGE(j.contains("schema_version"), name);
    CHECK_MESSAGE(j.value("config_hash", std::string()) == hash, name);
  }
}

TEST_CASE("evaluate without a model names the train stage") {
  const auto dir = fresh_dir("physiodecode_cli_missing");
  const auto r = cli("evaluate --workdir \"" + dir.string() + "\"");
  CHECK(r.code == 3);
  CHECK(r.err.find("train") != std::string::npos);
}

TEST_CASE("workdir from the environment") {
  const auto dir = fresh_dir("physiodecode_cli_env");
  const auto r = cli("evaluate", "PHYSIODECODE_WORKDIR=\"" + dir.string() + "\"");
  CHECK(r.code == 3);
  CHECK(r.err.find(dir.string()) != std::string::npos);
}

TEST_CASE("configuration errors exit with 2") {
  const auto dir = fresh_dir("physiodecode_cli_config");
  const std::string wd = " --workdir \"" + dir.string() + "\"";
  CHECK(cli("synth --set no_such_key=1" + wd).code == 2);
  CHECK(cli("synth --folds 1" + wd).code == 2);
  CHECK(cli("evaluate --format xml" + wd).code == 2);
  CHECK(cli("frobnicate" + wd).code == 2);
  CHECK(cli("ablate --mask ecg" + wd).code == 2);
}

TEST_CASE("malformed epoch data exits with 4") {
  const auto dir = fresh_dir("physiodecode_cli_data");
  {
    std::ofstream junk(dir / "junk.epb", std::ios::binary);
    junk << "definitely not an epoch file";
  }
  const auto r = cli("extract --workdir \"" + dir.string() + "\" --data \"" + (dir / "junk.epb").string() + "\"");
  CHECK(r.code == 4);
}

TEST_CASE("help exits cleanly") { CHECK(cli("--help").code == 0); }
