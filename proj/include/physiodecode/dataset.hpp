#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace physiodecode {

// Ordinals are part of the EPB format and must never change.
enum class BehaviorClass : std::uint8_t { Brake = 0, Change = 1, Throttle = 2, Turn = 3 };

inline constexpr int kNumClasses = 4;
inline constexpr std::array<BehaviorClass, kNumClasses> kAllClasses = {
    BehaviorClass::Brake, BehaviorClass::Change, BehaviorClass::Throttle, BehaviorClass::Turn};

std::string_view class_name(BehaviorClass c);
// Accepts the class name (case-insensitive) or its ordinal as text.
BehaviorClass parse_class(std::string_view text);
BehaviorClass class_from_ordinal(int ordinal);
constexpr int ordinal(BehaviorClass c) noexcept { return static_cast<int>(c); }

enum class Modality { EEG, EMG, GSR };
std::string_view modality_name(Modality m);

// Half-open channel interval [begin, end).
struct ChannelRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool contains(std::size_t ch) const noexcept { return ch >= begin && ch < end; }
};

struct ModalityLayout {
  ChannelRange eeg;
  ChannelRange emg;
  ChannelRange gsr;
  std::vector<std::string> channel_names;

  std::size_t total() const noexcept { return channel_names.size(); }
  const ChannelRange& range(Modality m) const noexcept;
  Modality modality_of(std::size_t channel) const;

  // Throws LayoutMismatch unless the ranges are disjoint, contiguous and
  // cover [0, total).
  void validate() const;

  // 59 EEG (10-20 extended montage) + 4 EMG + 1 GSR.
  static ModalityLayout canonical();
};

inline constexpr double kDefaultSampleRateHz = 500.0;
inline constexpr double kDefaultWindowS = 2.0;
inline constexpr double kDefaultBaselineS = 0.5;

// round(fs * window) + 1: both window end points are sampled.
std::size_t samples_per_window(double sample_rate_hz, double window_s = kDefaultWindowS);

// One event-locked multichannel window. `samples` is channel-major:
// samples[ch * n_samples + t].
struct Epoch {
  std::string subject_id;
  std::string event_id;
  BehaviorClass label = BehaviorClass::Brake;
  double sample_rate_hz = kDefaultSampleRateHz;
  double t0_offset_s = kDefaultBaselineS;
  std::size_t n_channels = 0;
  std::size_t n_samples = 0;
  std::vector<double> samples;

  Epoch() = default;
  Epoch(std::size_t channels, std::size_t length)
      : n_channels(channels), n_samples(length), samples(channels * length, 0.0) {}

  std::span<double> channel(std::size_t ch) noexcept {
    return {samples.data() + ch * n_samples, n_samples};
  }
  std::span<const double> channel(std::size_t ch) const noexcept {
    return {samples.data() + ch * n_samples, n_samples};
  }
};

// Throws ChannelCountMismatch / NonFiniteSample tagged with `record`.
void validate_epoch(const Epoch& epoch, const ModalityLayout& layout, std::size_t record = 0);

// ---------------------------------------------------------------------------
// EPB binary format (all integers and floats little-endian):
//   "EPB1" | u16 version=1 | u16 n_channels | u32 n_samples | u32 n_epochs |
//   f32 sample_rate | per epoch: u16 len + subject bytes, u16 len + event
//   bytes, u8 label, n_channels*n_samples f32 (channel-major).
// Samples are stored as f32, so values round to single precision on write.

inline constexpr std::uint16_t kEpbVersion = 1;

struct EpbHeader {
  std::uint16_t version = kEpbVersion;
  std::uint16_t n_channels = 0;
  std::uint32_t n_samples = 0;
  std::uint32_t n_epochs = 0;
  float sample_rate = 0.0f;
};

// Streams epochs out of an EPB file one at a time.
class EpbReader {
 public:
  EpbReader(const std::filesystem::path& path, const ModalityLayout& layout);

  const EpbHeader& header() const noexcept { return header_; }
  std::size_t position() const noexcept { return next_; }
  bool done() const noexcept { return next_ >= header_.n_epochs; }
  Epoch next();

 private:
  std::ifstream in_;
  EpbHeader header_;
  ModalityLayout layout_;
  std::size_t next_ = 0;
  std::vector<float> buffer_;
};

// Streams epochs into an EPB file; the epoch count is patched in on finish().
class EpbWriter {
 public:
  EpbWriter(const std::filesystem::path& path, std::uint16_t n_channels, std::uint32_t n_samples,
            float sample_rate);
  ~EpbWriter();
  EpbWriter(const EpbWriter&) = delete;
  EpbWriter& operator=(const EpbWriter&) = delete;

  void write(const Epoch& epoch);
  void finish();

 private:
  std::ofstream out_;
  EpbHeader header_;
  std::vector<float> buffer_;
  bool finished_ = false;
};

std::vector<Epoch> read_epochs(const std::filesystem::path& path, const ModalityLayout& layout);
void write_epochs(const std::filesystem::path& path, std::span<const Epoch> epochs);

// Manifest CSV: epoch_index,subject_id,event_id,label
void write_manifest_csv(const std::filesystem::path& path, std::span<const Epoch> epochs);

// ---------------------------------------------------------------------------
// Splitting

struct DatasetSplit {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
};

// Per class: collect indices in input order, shuffle with Rng(seed, class),
// and take the first round(n_c * test_fraction) into the test set. Both index
// lists are returned in ascending order. Throws ClassTooSmall when a present
// class has fewer than two samples.
DatasetSplit stratified_split(std::span<const BehaviorClass> labels, double test_fraction,
                              std::uint64_t seed);

// Stratified k-fold assignment: returns fold id in [0, folds) per sample.
// Per class the shuffled members are dealt round-robin, so every fold's class
// count is within one of n_c / folds.
std::vector<int> stratified_folds(std::span<const BehaviorClass> labels, int folds,
                                  std::uint64_t seed);

std::array<std::size_t, kNumClasses> class_counts(std::span<const BehaviorClass> labels);

// ---------------------------------------------------------------------------
// Synthetic labeled epochs with planted, band-limited class signatures on a
// pink-noise background:
//   Brake    - GSR phasic ramp over (0, 1.5] s plus an EEG beta burst
//   Change   - post-event suppression of the ongoing EEG alpha rhythm
//   Throttle - weak broadband EMG increase on all channels
//   Turn     - opposite-sign EMG envelope on channels {0,1} vs {2,3}

struct SignatureAmplitudes {
  double eeg_beta_uv = 6.0;          // Brake beta burst peak amplitude
  double gsr_phasic_us = 0.6;        // Brake phasic ramp height
  double eeg_alpha_suppression = 0.8;  // Change: fraction of alpha removed post-event
  double emg_throttle_gain = 0.6;    // Throttle: added envelope gain
  double emg_turn_gain = 2.0;        // Turn: active-side envelope gain
};

struct SyntheticConfig {
  std::size_t n_per_class = 50;
  // Optional per-class count overrides (class imbalance).
  std::optional<std::array<std::size_t, kNumClasses>> class_counts;
  std::uint64_t seed = 0;
  std::size_t n_subjects = 8;
  double sample_rate_hz = kDefaultSampleRateHz;
  double window_s = kDefaultWindowS;
  double baseline_s = kDefaultBaselineS;
  double eeg_noise_uv = 10.0;
  double eeg_alpha_uv = 6.0;
  double emg_noise_uv = 5.0;
  double gsr_tonic_us = 5.0;
  double gsr_noise_us = 0.02;
  SignatureAmplitudes signature;
};

// Label of every synthetic epoch, in generation order.
std::vector<BehaviorClass> synthetic_labels(const SyntheticConfig& cfg);

// Epoch `index` of the synthetic dataset; depends only on (cfg, layout, index).
Epoch synthesize_epoch(const SyntheticConfig& cfg, const ModalityLayout& layout,
                       std::size_t index);

std::vector<Epoch> generate_synthetic(const SyntheticConfig& cfg, const ModalityLayout& layout);

}  // namespace physiodecode
