#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "physiodecode/dataset.hpp"
#include "physiodecode/error.hpp"
#include "physiodecode/rng.hpp"

using namespace physiodecode;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "physiodecode_test_dataset";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<Epoch> small_synthetic(std::size_t per_class, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n_per_class = per_class;
  cfg.seed = seed;
  return generate_synthetic(cfg, ModalityLayout::canonical());
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("class names and ordinals are fixed") {
  CHECK(ordinal(BehaviorClass::Brake) == 0);
  CHECK(ordinal(BehaviorClass::Change) == 1);
  CHECK(ordinal(BehaviorClass::Throttle) == 2);
  CHECK(ordinal(BehaviorClass::Turn) == 3);
  CHECK(class_name(BehaviorClass::Throttle) == "Throttle");
  CHECK(parse_class("turn") == BehaviorClass::Turn);
  CHECK(parse_class("1") == BehaviorClass::Change);
}

TEST_CASE("canonical layout is 59 EEG + 4 EMG + 1 GSR and validates") {
  const auto layout = ModalityLayout::canonical();
  CHECK(layout.eeg.size() == 59);
  CHECK(layout.emg.size() == 4);
  CHECK(layout.gsr.size() == 1);
  CHECK(layout.total() == 64);
  CHECK_NOTHROW(layout.validate());
  CHECK(layout.modality_of(0) == Modality::EEG);
  CHECK(layout.modality_of(60) == Modality::EMG);
  CHECK(layout.modality_of(63) == Modality::GSR);

  auto broken = layout;
  broken.emg.begin += 1;
  CHECK(kind_of([&] { broken.validate(); }) == ErrorKind::LayoutMismatch);
}

TEST_CASE("window length samples both end points") {
  CHECK(samples_per_window(500.0) == 1001);
  CHECK(samples_per_window(1000.0) == 2001);
}

TEST_CASE("EPB round trip is lossless at single precision") {
  const auto epochs = small_synthetic(1, 3);
  const auto path = temp_file("roundtrip.epb");
  write_epochs(path, {epochs.data(), 3});
  const auto back = read_epochs(path, ModalityLayout::canonical());
  REQUIRE(back.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(back[e].subject_id == epochs[e].subject_id);
    CHECK(back[e].event_id == epochs[e].event_id);
    CHECK(back[e].label == epochs[e].label);
    REQUIRE(back[e].samples.size() == epochs[e].samples.size());
    bool equal = true;
    for (std::size_t i = 0; i < back[e].samples.size(); ++i)
      equal = equal && back[e].samples[i] == static_cast<double>(static_cast<float>(epochs[e].samples[i]));
    CHECK(equal);
  }

  // Reading the already-rounded data back out again is bitwise stable.
  const auto path2 = temp_file("roundtrip2.epb");
  write_epochs(path2, back);
  const auto again = read_epochs(path2, ModalityLayout::canonical());
  for (std::size_t e = 0; e < 3; ++e) CHECK(again[e].samples == back[e].samples);
}

TEST_CASE("EPB reader rejects wrong magic, version and channel count") {
  const auto layout = ModalityLayout::canonical();
  const auto bad_magic = temp_file("bad_magic.epb");
  {
    std::ofstream out(bad_magic, std::ios::binary);
    out << "NOPE and more bytes to fill a header";
  }
  CHECK(kind_of([&] { read_epochs(bad_magic, layout); }) == ErrorKind::MagicMismatch);

  const auto epochs = small_synthetic(1, 5);
  const auto good = temp_file("good.epb");
  write_epochs(good, {epochs.data(), 1});
  const auto bad_version = temp_file("bad_version.epb");
  fs::copy_file(good, bad_version, fs::copy_options::overwrite_existing);
  {
    std::fstream f(bad_version, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const char v[2] = {9, 0};
    f.write(v, 2);
  }
  CHECK(kind_of([&] { read_epochs(bad_version, layout); }) == ErrorKind::VersionUnsupported);

  Epoch wide(68, 1001);
  wide.subject_id = "s";
  wide.event_id = "e";
  const auto path68 = temp_file("ch68.epb");
  {
    EpbWriter w(path68, 68, 1001, 500.0f);
    w.write(wide);
    w.finish();
  }
  CHECK(kind_of([&] { read_epochs(path68, layout); }) == ErrorKind::ChannelCountMismatch);
}

TEST_CASE("a NaN sample in the first record is reported with record index 0") {
  const auto epochs = small_synthetic(1, 8);
  const auto path = temp_file("nan.epb");
  write_epochs(path, {epochs.data(), 2});
  // Header (20 bytes), then u16 + subject, u16 + event, u8 label, samples.
  const std::size_t offset = 20 + 2 + epochs[0].subject_id.size() + 2 + epochs[0].event_id.size() + 1;
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(offset));
    const float nan = std::numeric_limits<float>::quiet_NaN();
    char bytes[4];
    std::memcpy(bytes, &nan, 4);
    f.write(bytes, 4);
  }
  try {
    read_epochs(path, ModalityLayout::canonical());
    FAIL("expected NonFiniteSample");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteSample);
    REQUIRE(e.record().has_value());
    CHECK(*e.record() == 0);
  }
}

TEST_CASE("streaming reader yields epochs in file order") {
  const auto epochs = small_synthetic(2, 11);
  const auto path = temp_file("stream.epb");
  write_epochs(path, epochs);
  EpbReader reader(path, ModalityLayout::canonical());
  CHECK(reader.header().n_epochs == epochs.size());
  std::size_t i = 0;
  while (!reader.done()) {
    const auto e = reader.next();
    CHECK(e.event_id == epochs[i].event_id);
    ++i;
  }
  CHECK(i == epochs.size());
}

TEST_CASE("manifest CSV has the fixed header") {
  const auto epochs = small_synthetic(1, 2);
  const auto path = temp_file("manifest.csv");
  write_manifest_csv(path, epochs);
  std::ifstream in(path);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "epoch_index,subject_id,event_id,label");
  CHECK(first.rfind("0,", 0) == 0);
}

TEST_CASE("stratified split on imbalanced class counts") {
  std::vector<BehaviorClass> labels;
  const std::array<std::size_t, 4> counts = {6413, 3132, 2446, 5891};
  for (int c = 0; c < 4; ++c) labels.insert(labels.end(), counts[c], class_from_ordinal(c));
  const auto split = stratified_split(labels, 0.2, 42);
  std::array<std::size_t, 4> test{};
  for (auto i : split.test_indices) ++test[ordinal(labels[i])];
  const std::array<long, 4> expected = {1283, 626, 489, 1179};
  for (int c = 0; c < 4; ++c) CHECK(std::labs(static_cast<long>(test[c]) - expected[c]) <= 1);
  CHECK(split.train_indices.size() + split.test_indices.size() == labels.size());

  std::vector<int> seen(labels.size(), 0);
  for (auto i : split.train_indices) ++seen[i];
  for (auto i : split.test_indices) ++seen[i];
  CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
  CHECK(std::is_sorted(split.test_indices.begin(), split.test_indices.end()));
}

TEST_CASE("stratified split preconditions and determinism") {
  const std::vector<BehaviorClass> one_each = {BehaviorClass::Brake, BehaviorClass::Change,
                                               BehaviorClass::Throttle, BehaviorClass::Turn};
  CHECK(kind_of([&] { stratified_split(one_each, 0.5, 1); }) == ErrorKind::ClassTooSmall);

  std::vector<BehaviorClass> labels;
  Rng rng(99);
  for (int i = 0; i < 400; ++i) labels.push_back(class_from_ordinal(static_cast<int>(rng.below(4))));
  const auto a = stratified_split(labels, 0.25, 7);
  const auto b = stratified_split(labels, 0.25, 7);
  CHECK(a.train_indices == b.train_indices);
  CHECK(a.test_indices == b.test_indices);
  const auto c = stratified_split(labels, 0.25, 8);
  CHECK(a.test_indices != c.test_indices);
}

TEST_CASE("split commutes with a relabelling permutation of the inputs") {
  std::vector<BehaviorClass> labels;
  for (int i = 0; i < 120; ++i) labels.push_back(class_from_ordinal(i % 4));
  const auto base = stratified_split(labels, 0.2, 5);

  // A permutation that keeps the order of samples within each class maps the
  // per-class sequences onto each other, so the split must follow it.
  std::vector<std::size_t> perm(labels.size());
  std::vector<std::size_t> by_class[4];
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[ordinal(labels[i])].push_back(i);
  std::vector<BehaviorClass> shuffled;
  std::vector<std::size_t> new_of_old(labels.size());
  for (int c = 0; c < 4; ++c)
    for (auto old : by_class[c]) {
      new_of_old[old] = shuffled.size();
      shuffled.push_back(labels[old]);
    }
  const auto moved = stratified_split(shuffled, 0.2, 5);
  std::vector<std::size_t> mapped;
  for (auto i : base.test_indices) mapped.push_back(new_of_old[i]);
  std::sort(mapped.begin(), mapped.end());
  CHECK(mapped == moved.test_indices);
}

TEST_CASE("stratified folds keep per-class counts within one") {
  std::vector<BehaviorClass> labels;
  const std::array<std::size_t, 4> counts = {5130, 2506, 1957, 4712};
  for (int c = 0; c < 4; ++c) labels.insert(labels.end(), counts[c], class_from_ordinal(c));
  const auto folds = stratified_folds(labels, 5, 3);
  for (int f = 0; f < 5; ++f)
    for (int c = 0; c < 4; ++c) {
      std::size_t n = 0;
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (folds[i] == f && ordinal(labels[i]) == c) ++n;
      const double share = static_cast<double>(counts[c]) / 5.0;
      CHECK(std::abs(static_cast<double>(n) - share) <= 1.0);
    }
}

TEST_CASE("synthetic generator contract") {
  SyntheticConfig cfg;
  cfg.n_per_class = 50;
  cfg.seed = 17;
  const auto layout = ModalityLayout::canonical();
  const auto labels = synthetic_labels(cfg);
  CHECK(labels.size() == 200);
  const auto counts = class_counts(labels);
  for (auto n : counts) CHECK(n == 50);

  const auto e1 = synthesize_epoch(cfg, layout, 13);
  const auto e2 = synthesize_epoch(cfg, layout, 13);
  CHECK(e1.samples == e2.samples);
  CHECK(e1.n_samples == 1001);
  CHECK_NOTHROW(validate_epoch(e1, layout));
  for (std::size_t ch = 0; ch < layout.total(); ++ch) {
    const auto x = e1.channel(ch);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double var = 0;
    for (double v : x) var += (v - mean) * (v - mean);
    CHECK(var > 0.0);
  }

  SyntheticConfig imbalanced = cfg;
  imbalanced.class_counts = std::array<std::size_t, 4>{10, 3, 5, 7};
  const auto c2 = class_counts(synthetic_labels(imbalanced));
  CHECK(c2[0] == 10);
  CHECK(c2[1] == 3);
  CHECK(c2[2] == 5);
  CHECK(c2[3] == 7);
}
