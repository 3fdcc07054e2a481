#include "physiodecode/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <numeric>

#include "physiodecode/error.hpp"
#include "physiodecode/rng.hpp"

namespace physiodecode {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {"Brake", "Change", "Throttle",
                                                                   "Turn"};

// 64-channel cap minus the reference/non-cerebral leads and Fpz.
constexpr std::array<std::string_view, 59> kEegNames = {
    "Fp1", "Fp2", "AF3", "AF4", "F7",  "F5",  "F3",  "F1",  "Fz",  "F2",  "F4",  "F6",
    "F8",  "FT7", "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "FT8", "T7",  "C5",
    "C3",  "C1",  "Cz",  "C2",  "C4",  "C6",  "T8",  "TP7", "CP5", "CP3", "CP1", "CPz",
    "CP2", "CP4", "CP6", "TP8", "P7",  "P5",  "P3",  "P1",  "Pz",  "P2",  "P4",  "P6",
    "P8",  "PO7", "PO5", "PO3", "POz", "PO4", "PO6", "PO8", "O1",  "Oz",  "O2"};

constexpr char kMagic[4] = {'E', 'P', 'B', '1'};

void put_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>(v >> 24)};
  out.write(b, 4);
}

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

void read_exact(std::istream& in, void* dst, std::size_t n, std::size_t record) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw Error(ErrorKind::Io, "unexpected end of EPB file", record);
}

std::uint16_t get_u16(std::istream& in, std::size_t record) {
  unsigned char b[2];
  read_exact(in, b, 2, record);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& in, std::size_t record) {
  unsigned char b[4];
  read_exact(in, b, 4, record);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_string(std::ostream& out, const std::string& s) {
  if (s.size() > UINT16_MAX) throw Error(ErrorKind::Io, "identifier longer than 65535 bytes");
  put_u16(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in, std::size_t record) {
  const std::uint16_t len = get_u16(in, record);
  std::string s(len, '\0');
  if (len > 0) read_exact(in, s.data(), len, record);
  return s;
}

}  // namespace

std::string_view class_name(BehaviorClass c) { return kClassNames.at(ordinal(c)); }

BehaviorClass class_from_ordinal(int value) {
  if (value < 0 || value >= kNumClasses)
    throw Error(ErrorKind::Io, "label ordinal out of range: " + std::to_string(value));
  return static_cast<BehaviorClass>(value);
}

BehaviorClass parse_class(std::string_view text) {
  for (int i = 0; i < kNumClasses; ++i) {
    const auto name = kClassNames[i];
    if (name.size() == text.size() &&
        std::equal(name.begin(), name.end(), text.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) ==
                 std::tolower(static_cast<unsigned char>(b));
        }))
      return static_cast<BehaviorClass>(i);
  }
  if (text.size() == 1 && text[0] >= '0' && text[0] <= '3') return class_from_ordinal(text[0] - '0');
  throw Error(ErrorKind::Io, "unknown behavior class '" + std::string(text) + "'");
}

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::EEG: return "EEG";
    case Modality::EMG: return "EMG";
    case Modality::GSR: return "GSR";
  }
  return "?";
}

const ChannelRange& ModalityLayout::range(Modality m) const noexcept {
  switch (m) {
    case Modality::EMG: return emg;
    case Modality::GSR: return gsr;
    case Modality::EEG: break;
  }
  return eeg;
}

Modality ModalityLayout::modality_of(std::size_t channel) const {
  if (eeg.contains(channel)) return Modality::EEG;
  if (emg.contains(channel)) return Modality::EMG;
  if (gsr.contains(channel)) return Modality::GSR;
  throw Error(ErrorKind::LayoutMismatch, "channel " + std::to_string(channel) + " outside layout");
}

void ModalityLayout::validate() const {
  std::array<ChannelRange, 3> ranges = {eeg, emg, gsr};
  std::sort(ranges.begin(), ranges.end(),
            [](const ChannelRange& a, const ChannelRange& b) { return a.begin < b.begin; });
  std::size_t cursor = 0;
  for (const auto& r : ranges) {
    if (r.begin != cursor || r.end < r.begin)
      throw Error(ErrorKind::LayoutMismatch, "modality ranges must be contiguous and disjoint");
    cursor = r.end;
  }
  if (cursor != total())
    throw Error(ErrorKind::LayoutMismatch, "modality ranges do not cover all channel names");
}

ModalityLayout ModalityLayout::canonical() {
  ModalityLayout layout;
  for (auto name : kEegNames) layout.channel_names.emplace_back(name);
  for (int i = 0; i < 4; ++i) layout.channel_names.push_back("ch" + std::to_string(i));
  layout.channel_names.emplace_back("0");
  layout.eeg = {0, 59};
  layout.emg = {59, 63};
  layout.gsr = {63, 64};
  return layout;
}

std::size_t samples_per_window(double sample_rate_hz, double window_s) {
  return static_cast<std::size_t>(std::llround(sample_rate_hz * window_s)) + 1;
}

void validate_epoch(const Epoch& epoch, const ModalityLayout& layout, std::size_t record) {
  if (epoch.n_channels != layout.total())
    throw Error(ErrorKind::ChannelCountMismatch,
                "epoch has " + std::to_string(epoch.n_channels) + " channels, layout expects " +
                    std::to_string(layout.total()),
                record);
  if (epoch.samples.size() != epoch.n_channels * epoch.n_samples)
    throw Error(ErrorKind::LayoutMismatch, "sample buffer size does not match shape", record);
  for (double v : epoch.samples)
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteSample, "non-finite sample", record);
}

// ---------------------------------------------------------------------------

EpbReader::EpbReader(const std::filesystem::path& path, const ModalityLayout& layout)
    : in_(path, std::ios::binary), layout_(layout) {
  if (!in_) throw Error(ErrorKind::Io, "cannot open " + path.string());
  char magic[4];
  in_.read(magic, 4);
  if (in_.gcount() != 4 || !std::equal(magic, magic + 4, kMagic))
    throw Error(ErrorKind::MagicMismatch, path.string() + " is not an EPB file");
  header_.version = get_u16(in_, 0);
  if (header_.version != kEpbVersion)
    throw Error(ErrorKind::VersionUnsupported,
                "EPB version " + std::to_string(header_.version) + " is not supported");
  header_.n_channels = get_u16(in_, 0);
  header_.n_samples = get_u32(in_, 0);
  header_.n_epochs = get_u32(in_, 0);
  header_.sample_rate = std::bit_cast<float>(get_u32(in_, 0));
  if (header_.n_channels != layout_.total())
    throw Error(ErrorKind::ChannelCountMismatch,
                "file has " + std::to_string(header_.n_channels) + " channels, layout expects " +
                    std::to_string(layout_.total()),
                0);
  buffer_.resize(std::size_t{header_.n_channels} * header_.n_samples);
}

Epoch EpbReader::next() {
  const std::size_t record = next_;
  if (done()) throw Error(ErrorKind::Io, "read past last epoch", record);
  Epoch epoch(header_.n_channels, header_.n_samples);
  epoch.sample_rate_hz = header_.sample_rate;
  epoch.subject_id = get_string(in_, record);
  epoch.event_id = get_string(in_, record);
  unsigned char label = 0;
  read_exact(in_, &label, 1, record);
  epoch.label = class_from_ordinal(label);

  std::vector<unsigned char> raw(buffer_.size() * 4);
  read_exact(in_, raw.data(), raw.size(), record);
  for (std::size_t i = 0; i < buffer_.size(); ++i) {
    const unsigned char* b = raw.data() + 4 * i;
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                               (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) |
                               (static_cast<std::uint32_t>(b[3]) << 24);
    epoch.samples[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  validate_epoch(epoch, layout_, record);
  ++next_;
  return epoch;
}

EpbWriter::EpbWriter(const std::filesystem::path& path, std::uint16_t n_channels,
                     std::uint32_t n_samples, float sample_rate)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(ErrorKind::Io, "cannot create " + path.string());
  header_.n_channels = n_channels;
  header_.n_samples = n_samples;
  header_.sample_rate = sample_rate;
  out_.write(kMagic, 4);
  put_u16(out_, header_.version);
  put_u16(out_, header_.n_channels);
  put_u32(out_, header_.n_samples);
  put_u32(out_, 0);
  put_f32(out_, header_.sample_rate);
}

EpbWriter::~EpbWriter() {
  try {
    finish();
  } catch (...) {
  }
}

void EpbWriter::write(const Epoch& epoch) {
  const std::size_t record = header_.n_epochs;
  if (epoch.n_channels != header_.n_channels)
    throw Error(ErrorKind::ChannelCountMismatch, "epoch channel count differs from file", record);
  if (epoch.n_samples != header_.n_samples)
    throw Error(ErrorKind::LayoutMismatch, "epoch length differs from file", record);
  put_string(out_, epoch.subject_id);
  put_string(out_, epoch.event_id);
  out_.put(static_cast<char>(ordinal(epoch.label)));
  std::string raw(epoch.samples.size() * 4, '\0');
  for (std::size_t i = 0; i < epoch.samples.size(); ++i) {
    const double v = epoch.samples[i];
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFiniteSample, "non-finite sample", record);
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    raw[4 * i] = static_cast<char>(bits & 0xff);
    raw[4 * i + 1] = static_cast<char>((bits >> 8) & 0xff);
    raw[4 * i + 2] = static_cast<char>((bits >> 16) & 0xff);
    raw[4 * i + 3] = static_cast<char>(bits >> 24);
  }
  out_.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  ++header_.n_epochs;
}

void EpbWriter::finish() {
  if (finished_) return;
  finished_ = true;
  out_.seekp(12);
  put_u32(out_, header_.n_epochs);
  out_.flush();
  if (!out_) throw Error(ErrorKind::Io, "failed writing EPB file");
  out_.close();
}

std::vector<Epoch> read_epochs(const std::filesystem::path& path, const ModalityLayout& layout) {
  EpbReader reader(path, layout);
  std::vector<Epoch> epochs;
  epochs.reserve(reader.header().n_epochs);
  while (!reader.done()) epochs.push_back(reader.next());
  return epochs;
}

void write_epochs(const std::filesystem::path& path, std::span<const Epoch> epochs) {
  const std::size_t channels = epochs.empty() ? 0 : epochs.front().n_channels;
  const std::size_t length = epochs.empty() ? 0 : epochs.front().n_samples;
  const double fs = epochs.empty() ? kDefaultSampleRateHz : epochs.front().sample_rate_hz;
  EpbWriter writer(path, static_cast<std::uint16_t>(channels), static_cast<std::uint32_t>(length),
                   static_cast<float>(fs));
  for (const auto& e : epochs) writer.write(e);
  writer.finish();
}

void write_manifest_csv(const std::filesystem::path& path, std::span<const Epoch> epochs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot create " + path.string());
  out << "epoch_index,subject_id,event_id,label\n";
  for (std::size_t i = 0; i < epochs.size(); ++i)
    out << i << ',' << epochs[i].subject_id << ',' << epochs[i].event_id << ','
        << class_name(epochs[i].label) << '\n';
}

// ---------------------------------------------------------------------------

std::array<std::size_t, kNumClasses> class_counts(std::span<const BehaviorClass> labels) {
  std::array<std::size_t, kNumClasses> counts{};
  for (auto c : labels) ++counts[ordinal(c)];
  return counts;
}

namespace {

std::array<std::vector<std::size_t>, kNumClasses> members_by_class(
    std::span<const BehaviorClass> labels) {
  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[ordinal(labels[i])].push_back(i);
  return members;
}

constexpr std::uint64_t kSplitStream = 0x5350'4c49'5400ULL;
constexpr std::uint64_t kFoldStream = 0x464f'4c44'5300ULL;

}  // namespace

DatasetSplit stratified_split(std::span<const BehaviorClass> labels, double test_fraction,
                              std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error(ErrorKind::ConfigInvalid, "test_fraction must lie in (0, 1)");
  auto members = members_by_class(labels);
  for (int c = 0; c < kNumClasses; ++c)
    if (members[c].size() < 2)
      throw Error(ErrorKind::ClassTooSmall, "class " + std::string(class_name(class_from_ordinal(c))) +
                                                " has fewer than 2 samples");

  DatasetSplit split;
  split.seed = seed;
  split.test_fraction = test_fraction;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = members[c];
    Rng rng(seed, {kSplitStream, static_cast<std::uint64_t>(c)});
    rng.shuffle(std::span(idx));
    const auto n = static_cast<long long>(idx.size());
    const long long n_test = std::clamp(std::llround(static_cast<double>(n) * test_fraction), 1LL, n - 1);
    split.test_indices.insert(split.test_indices.end(), idx.begin(), idx.begin() + n_test);
    split.train_indices.insert(split.train_indices.end(), idx.begin() + n_test, idx.end());
  }
  std::sort(split.train_indices.begin(), split.train_indices.end());
  std::sort(split.test_indices.begin(), split.test_indices.end());
  return split;
}

std::vector<int> stratified_folds(std::span<const BehaviorClass> labels, int folds,
                                  std::uint64_t seed) {
  if (folds < 2) throw Error(ErrorKind::ConfigInvalid, "need at least 2 folds");
  auto members = members_by_class(labels);
  for (int c = 0; c < kNumClasses; ++c)
    if (!members[c].empty() && members[c].size() < static_cast<std::size_t>(folds))
      throw Error(ErrorKind::ClassTooSmall,
                  "class " + std::string(class_name(class_from_ordinal(c))) + " has fewer samples than folds");

  std::vector<int> fold_of(labels.size(), 0);
  std::size_t offset = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = members[c];
    Rng rng(seed, {kFoldStream, static_cast<std::uint64_t>(c)});
    rng.shuffle(std::span(idx));
    for (std::size_t j = 0; j < idx.size(); ++j)
      fold_of[idx[j]] = static_cast<int>((offset + j) % static_cast<std::size_t>(folds));
    offset += idx.size();
  }
  return fold_of;
}

}  // namespace physiodecode
