#include <cmath>
#include <filesystem>
#include <functional>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "physiodecode/dsp.hpp"
#include "physiodecode/error.hpp"
#include "physiodecode/features.hpp"
#include "physiodecode/rng.hpp"

using namespace physiodecode;
using namespace physiodecode::features;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::Io;
}

std::vector<Epoch> preprocessed_synthetic(std::size_t per_class, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n_per_class = per_class;
  cfg.seed = seed;
  const auto layout = ModalityLayout::canonical();
  auto epochs = generate_synthetic(cfg, layout);
  for (auto& e : epochs) e = dsp::preprocess(e, layout, dsp::PreprocessConfig{});
  return epochs;
}

FeatureMatrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  FeatureMatrix m;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < cols; ++j) names.push_back("EEG_c" + std::to_string(j) + "_line_length");
  m.registry = FeatureRegistry(names);
  m.values = Matrix(rows, cols);
  Rng rng(seed);
  for (auto& v : m.values.data) v = rng.uniform(-3.0, 5.0);
  for (std::size_t i = 0; i < rows; ++i) {
    m.labels.push_back(class_from_ordinal(static_cast<int>(i % 4)));
    m.subject_ids.push_back(i % 2 ? "s1" : "s2");
  }
  return m;
}

}  // namespace

TEST_CASE("canonical registry has 503 unique names in four blocks") {
  const auto reg = FeatureRegistry::build(ModalityLayout::canonical());
  REQUIRE(reg.size() == 503);
  std::set<std::string> unique(reg.names().begin(), reg.names().end());
  CHECK(unique.size() == 503);

  std::size_t eeg = 0, emg = 0, gsr = 0, global = 0;
  for (const auto& n : reg.names()) {
    if (n.rfind("EEG_", 0) == 0) ++eeg;
    else if (n.rfind("EMG_", 0) == 0) ++emg;
    else if (n.rfind("GSR_", 0) == 0) ++gsr;
    else if (n.rfind("GLOBAL_", 0) == 0) ++global;
  }
  CHECK(eeg == 472);
  CHECK(emg == 24);
  CHECK(gsr == 5);
  CHECK(global == 2);
  CHECK(reg.index_of("EEG_Cz_alpha_power") >= 0);
  CHECK(reg.index_of("EMG_ch2_band_low") >= 0);
  CHECK(reg.index_of("GSR_0_line_length") >= 0);
  CHECK(reg.name(501) == "GLOBAL_alpha_theta_ratio");
  CHECK(reg.name(502) == "GLOBAL_emg_asymmetry");
  CHECK(reg.modality(501) == Modality::EEG);
  CHECK(reg.modality(502) == Modality::EMG);
  CHECK(reg.index_of("nope") == -1);
}

TEST_CASE("line length") {
  CHECK(line_length(std::vector<double>{5, 5, 5, 5}) == 0.0);
  CHECK(line_length(std::vector<double>{0, 1, 3}) == 3.0);
  CHECK(kind_of([] { line_length(std::vector<double>{1.0}); }) == ErrorKind::TooShort);

  Rng rng(42);
  std::vector<double> x(1001);
  for (auto& v : x) v = rng.normal();
  double expected = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) expected += std::abs(x[i + 1] - x[i]);
  CHECK(line_length(x) == expected);
}

TEST_CASE("time-domain features") {
  const auto flat = time_features(std::vector<double>(10, 2.0));
  CHECK(flat.line_length == 0.0);
  CHECK(flat.deriv_var == 0.0);
  CHECK(flat.max_abs_change == 0.0);

  const auto zigzag = time_features(std::vector<double>{0, 1, 0, 1});
  CHECK(zigzag.line_length == 3.0);
  CHECK(zigzag.deriv_var == doctest::Approx(8.0 / 9.0).epsilon(1e-15));
  CHECK(zigzag.max_abs_change == 1.0);

  std::vector<double> ramp(100);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
  const auto r = time_features(ramp);
  CHECK(r.line_length == 99.0);
  CHECK(r.deriv_var == 0.0);
  CHECK(r.max_abs_change == 1.0);

  CHECK(kind_of([] { time_features(std::vector<double>{1.0, 2.0}); }) == ErrorKind::TooShort);
}

TEST_CASE("global indices") {
  CHECK(alpha_theta_ratio(std::vector<double>{4, 4}, std::vector<double>{4, 4}) == 1.0);
  CHECK(alpha_theta_ratio(std::vector<double>{0, 0}, std::vector<double>{0, 0}) == 1.0);
  CHECK(alpha_theta_ratio(std::vector<double>{2.0}, std::vector<double>{0.5}) == doctest::Approx(4.0).epsilon(1e-9));

  CHECK(emg_asymmetry(std::vector<double>{1, 2, 1, 2}) == 0.0);
  CHECK(emg_asymmetry(std::vector<double>{1, 2, 0, 0}) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(emg_asymmetry(std::vector<double>{1, 2, 0.5, 0.5}) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("zero epoch and single-channel alpha") {
  const auto layout = ModalityLayout::canonical();
  const FeatureExtractor fx(layout);
  const Epoch zero(layout.total(), 1001);
  const auto row = fx.extract(zero);
  REQUIRE(row.size() == 503);
  for (std::size_t j = 0; j < 501; ++j) CHECK(row[j] == 0.0);
  CHECK(row[501] == 1.0);
  CHECK(row[502] == 0.0);

  Epoch alpha(layout.total(), 1001);
  const auto s = oracle::sinusoid(10.0, 500.0, 1001, 10.0);
  std::copy(s.begin(), s.end(), alpha.channel(20).begin());
  const auto a = fx.extract(alpha);
  const auto& reg = fx.registry();
  const std::string ch = layout.channel_names[20];
  const double alpha_power = a[static_cast<std::size_t>(reg.index_of("EEG_" + ch + "_alpha_power"))];
  for (const char* band : {"delta", "theta", "beta", "gamma"})
    CHECK(alpha_power > a[static_cast<std::size_t>(reg.index_of("EEG_" + ch + "_" + band + "_power"))]);

  CHECK(kind_of([&] { fx.extract(Epoch(10, 1001)); }) == ErrorKind::LayoutMismatch);
}

TEST_CASE("scaling one channel scales only its own features") {
  const auto layout = ModalityLayout::canonical();
  const FeatureExtractor fx(layout);
  const auto epochs = preprocessed_synthetic(1, 21);
  const auto& base_epoch = epochs[0];
  auto scaled = base_epoch;
  const double c = -3.0;
  for (auto& v : scaled.channel(7)) v *= c;
  const auto base = fx.extract(base_epoch);
  const auto out = fx.extract(scaled);
  const auto& reg = fx.registry();
  const std::string prefix = "EEG_" + layout.channel_names[7] + "_";
  const auto close = [](double got, double want) { return std::abs(got - want) <= 1e-9 * std::abs(want); };
  for (std::size_t j = 0; j < 501; ++j) {
    const auto& name = reg.name(j);
    if (name.rfind(prefix, 0) != 0) {
      CHECK(out[j] == base[j]);
      continue;
    }
    const bool linear = name.ends_with("line_length") || name.ends_with("max_abs_change");
    CHECK_MESSAGE(close(out[j], (linear ? std::abs(c) : c * c) * base[j]), name);
  }
}

TEST_CASE("streaming and batch extraction are bitwise identical") {
  const auto layout = ModalityLayout::canonical();
  const FeatureExtractor fx(layout);
  const auto epochs = preprocessed_synthetic(50, 5);
  REQUIRE(epochs.size() == 200);
  const auto batch = fx.extract_batch(epochs, 4);
  const auto single = fx.extract_batch(epochs, 1);
  bool same = batch.values.data == single.values.data;
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto row = fx.extract(epochs[i]);
    for (std::size_t j = 0; j < row.size(); ++j) same = same && row[j] == batch.values(i, j);
  }
  CHECK(same);
  for (double v : batch.values.data) REQUIRE(std::isfinite(v));
}

TEST_CASE("modality masks") {
  CHECK(ModalityMask::parse("eeg").bits == ModalityMask::kEeg);
  CHECK(ModalityMask::parse("emg+gsr").bits == (ModalityMask::kEmg | ModalityMask::kGsr));
  CHECK(ModalityMask::parse("full") == ModalityMask::full());
  CHECK(ModalityMask::full().to_string() == "EEG+EMG+GSR");
  CHECK(kind_of([] { ModalityMask::parse("ecg"); }) == ErrorKind::ConfigInvalid);
  CHECK(canonical_masks().size() == 7);

  const auto reg = FeatureRegistry::build(ModalityLayout::canonical());
  const auto eeg = columns_for(reg, ModalityMask::parse("eeg"));
  const auto emg = columns_for(reg, ModalityMask::parse("emg"));
  const auto gsr = columns_for(reg, ModalityMask::parse("gsr"));
  CHECK(eeg.size() == 473);
  CHECK(emg.size() == 25);
  CHECK(gsr.size() == 5);
  std::set<std::size_t> all(eeg.begin(), eeg.end());
  all.insert(emg.begin(), emg.end());
  all.insert(gsr.begin(), gsr.end());
  CHECK(all.size() == 503);
  CHECK(columns_for(reg, ModalityMask::full()).size() == 503);
}

TEST_CASE("normalisation fitted and applied on the same rows") {
  auto m = random_matrix(60, 5, 3);
  for (std::size_t i = 0; i < m.rows(); ++i) m.values(i, 2) = 4.0;  // constant column
  const auto stats = fit_norm(m);
  const auto z = apply_norm(m, stats);
  for (std::size_t j = 0; j < 5; ++j) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) mean += z.values(i, j);
    mean /= static_cast<double>(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) sq += (z.values(i, j) - mean) * (z.values(i, j) - mean);
    const double sd = std::sqrt(sq / static_cast<double>(z.rows()));
    if (j == 2) {
      for (std::size_t i = 0; i < z.rows(); ++i) CHECK(z.values(i, j) == 0.0);
      continue;
    }
    CHECK(std::abs(mean) <= 1e-9);
    CHECK(std::abs(sd - 1.0) <= 1e-6);
  }
}

TEST_CASE("training statistics are applied unchanged to shifted test rows") {
  const auto train = random_matrix(80, 3, 9);
  const auto stats = fit_norm(train);
  auto test = train;
  const double shift = 2.5;
  for (auto& v : test.values.data) v += shift;
  const auto z = apply_norm(test, stats);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < z.rows(); ++i) mean += z.values(i, j);
    mean /= static_cast<double>(z.rows());
    CHECK(mean == doctest::Approx(shift / stats.global.std[j]).epsilon(1e-9));
  }

  const auto other = random_matrix(10, 4, 1);
  CHECK(kind_of([&] { apply_norm(other, stats); }) == ErrorKind::StatsDimensionMismatch);
}

TEST_CASE("fit on a row subset ignores the other rows") {
  auto m = random_matrix(40, 2, 4);
  std::vector<std::size_t> rows = {0, 1, 2, 3, 4, 5, 6, 7};
  const auto a = fit_norm(m, false, rows);
  for (std::size_t i = 8; i < 40; ++i) m.values(i, 0) = 1e6;
  const auto b = fit_norm(m, false, rows);
  CHECK(a.global.mean == b.global.mean);
  CHECK(a.global.std == b.global.std);
}

TEST_CASE("per-subject normalisation falls back to global statistics") {
  const auto m = random_matrix(40, 3, 6);
  const auto stats = fit_norm(m, true);
  CHECK(stats.per_subject());
  CHECK(stats.by_subject.size() == 2);
  auto unseen = select_rows(m, std::vector<std::size_t>{0, 1});
  unseen.subject_ids = {"new", "new"};
  const auto z = apply_norm(unseen, stats);
  CHECK(z.values(0, 0) == doctest::Approx((m.values(0, 0) - stats.global.mean[0]) / stats.global.std[0]));
}

TEST_CASE("feature CSV and normalisation JSON round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "physiodecode_test_features";
  std::filesystem::create_directories(dir);
  const auto m = random_matrix(12, 4, 8);
  write_feature_csv(dir / "f.csv", m);
  const auto back = read_feature_csv(dir / "f.csv");
  CHECK(back.values.data == m.values.data);
  CHECK(back.registry.names() == m.registry.names());
  CHECK(back.labels == m.labels);
  CHECK(back.subject_ids == m.subject_ids);

  const auto stats = fit_norm(m, true);
  const auto again = norm_stats_from_json(norm_stats_to_json(stats, "abc"));
  CHECK(again.feature_names == stats.feature_names);
  CHECK(again.global.mean == stats.global.mean);
  CHECK(again.global.std == stats.global.std);
  CHECK(again.by_subject.size() == stats.by_subject.size());
}

TEST_CASE("row and column selection") {
  const auto m = random_matrix(10, 4, 2);
  const auto cols = select_columns(m, std::vector<std::size_t>{3, 1});
  CHECK(cols.cols() == 2);
  CHECK(cols.values(5, 0) == m.values(5, 3));
  CHECK(cols.registry.name(1) == m.registry.name(1));
  const std::vector<std::string> names = {m.registry.name(2)};
  CHECK(select_columns(m, names).values(4, 0) == m.values(4, 2));
  const std::vector<std::string> missing = {"EEG_none_line_length"};
  CHECK(kind_of([&] { select_columns(m, missing); }) == ErrorKind::FeatureMismatch);
}
