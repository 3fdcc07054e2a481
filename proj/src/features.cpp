#include "physiodecode/features.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "physiodecode/error.hpp"
#include "physiodecode/parallel.hpp"

namespace physiodecode::features {

namespace {

constexpr std::array<std::string_view, 3> kTimeSuffixes = {"line_length", "deriv_var",
                                                           "max_abs_change"};
constexpr std::string_view kAlphaTheta = "GLOBAL_alpha_theta_ratio";
constexpr std::string_view kEmgAsymmetry = "GLOBAL_emg_asymmetry";

std::string band_suffix(Modality m, const Band& band) {
  return m == Modality::EMG ? "band_" + band.name : band.name + "_power";
}

std::size_t find_band(const std::vector<Band>& bands, std::string_view name) {
  for (std::size_t i = 0; i < bands.size(); ++i)
    if (bands[i].name == name) return i;
  throw Error(ErrorKind::LayoutMismatch, "band table lacks '" + std::string(name) + "'");
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Modality modality_of_feature(std::string_view name) {
  if (name == kAlphaTheta) return Modality::EEG;
  if (name == kEmgAsymmetry) return Modality::EMG;
  if (name.starts_with("EEG_")) return Modality::EEG;
  if (name.starts_with("EMG_")) return Modality::EMG;
  if (name.starts_with("GSR_")) return Modality::GSR;
  throw Error(ErrorKind::FeatureMismatch, "cannot derive modality of '" + std::string(name) + "'");
}

FeatureRegistry::FeatureRegistry(std::vector<std::string> names) : names_(std::move(names)) {
  modalities_.reserve(names_.size());
  for (const auto& n : names_) modalities_.push_back(modality_of_feature(n));
}

FeatureRegistry FeatureRegistry::build(const ModalityLayout& layout, const BandTable& bands) {
  layout.validate();
  std::vector<std::string> names;
  auto add_channel = [&](Modality m, std::size_t ch, const std::vector<Band>& table) {
    const std::string prefix =
        std::string(modality_name(m)) + "_" + layout.channel_names.at(ch) + "_";
    for (auto s : kTimeSuffixes) names.push_back(prefix + std::string(s));
    for (const auto& b : table) names.push_back(prefix + band_suffix(m, b));
  };
  for (std::size_t ch = layout.eeg.begin; ch < layout.eeg.end; ++ch)
    add_channel(Modality::EEG, ch, bands.eeg);
  for (std::size_t ch = layout.emg.begin; ch < layout.emg.end; ++ch)
    add_channel(Modality::EMG, ch, bands.emg);
  for (std::size_t ch = layout.gsr.begin; ch < layout.gsr.end; ++ch)
    add_channel(Modality::GSR, ch, bands.gsr);
  names.emplace_back(kAlphaTheta);
  names.emplace_back(kEmgAsymmetry);
  return FeatureRegistry(std::move(names));
}

std::ptrdiff_t FeatureRegistry::index_of(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? -1 : std::distance(names_.begin(), it);
}

ModalityMask ModalityMask::parse(std::string_view text) {
  ModalityMask mask;
  const std::string t = lower(text);
  if (t == "full" || t == "all") return full();
  std::size_t start = 0;
  while (start <= t.size()) {
    const std::size_t end = std::min(t.find('+', start), t.size());
    const std::string token = t.substr(start, end - start);
    if (token == "eeg")
      mask.bits |= kEeg;
    else if (token == "emg")
      mask.bits |= kEmg;
    else if (token == "gsr")
      mask.bits |= kGsr;
    else if (token.empty())
      throw Error(ErrorKind::EmptyMask, "empty modality in mask '" + std::string(text) + "'");
    else
      throw Error(ErrorKind::ConfigInvalid, "unknown modality '" + token + "' in mask '" + std::string(text) + "'");
    start = end + 1;
  }
  return mask;
}

bool ModalityMask::contains(Modality m) const noexcept {
  switch (m) {
    case Modality::EEG: return bits & kEeg;
    case Modality::EMG: return bits & kEmg;
    case Modality::GSR: return bits & kGsr;
  }
  return false;
}

std::string ModalityMask::to_string() const {
  std::string out;
  for (Modality m : {Modality::EEG, Modality::EMG, Modality::GSR}) {
    if (!contains(m)) continue;
    if (!out.empty()) out += '+';
    out += modality_name(m);
  }
  return out.empty() ? "NONE" : out;
}

std::vector<ModalityMask> canonical_masks() {
  using M = ModalityMask;
  return {M{M::kEeg}, M{M::kEmg}, M{M::kGsr}, M{M::kEeg | M::kEmg}, M{M::kEeg | M::kGsr},
          M{M::kEmg | M::kGsr}, M::full()};
}

std::vector<std::size_t> columns_for(const FeatureRegistry& registry, ModalityMask mask) {
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < registry.size(); ++i)
    if (mask.contains(registry.modality(i))) cols.push_back(i);
  return cols;
}

FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const std::size_t> rows) {
  FeatureMatrix out;
  out.registry = m.registry;
  out.values = Matrix(rows.size(), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = m.values.row(rows[r]);
    std::copy(src.begin(), src.end(), out.values.row(r).begin());
    if (!m.labels.empty()) out.labels.push_back(m.labels[rows[r]]);
    if (!m.subject_ids.empty()) out.subject_ids.push_back(m.subject_ids[rows[r]]);
  }
  return out;
}

FeatureMatrix select_columns(const FeatureMatrix& m, std::span<const std::size_t> cols) {
  FeatureMatrix out;
  std::vector<std::string> names;
  names.reserve(cols.size());
  for (auto c : cols) names.push_back(m.registry.name(c));
  out.registry = FeatureRegistry(std::move(names));
  out.values = Matrix(m.rows(), cols.size());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t j = 0; j < cols.size(); ++j) out.values(r, j) = m.values(r, cols[j]);
  out.labels = m.labels;
  out.subject_ids = m.subject_ids;
  return out;
}

FeatureMatrix select_columns(const FeatureMatrix& m, std::span<const std::string> names) {
  std::vector<std::size_t> cols;
  cols.reserve(names.size());
  for (const auto& n : names) {
    const auto idx = m.registry.index_of(n);
    if (idx < 0) throw Error(ErrorKind::FeatureMismatch, "unknown feature '" + n + "'");
    cols.push_back(static_cast<std::size_t>(idx));
  }
  return select_columns(m, std::span<const std::size_t>(cols));
}

// ---------------------------------------------------------------------------

double line_length(std::span<const double> x) {
  if (x.size() < 2) throw Error(ErrorKind::TooShort, "line length needs at least 2 samples");
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) sum += std::abs(x[i + 1] - x[i]);
  return sum;
}

TimeFeatures time_features(std::span<const double> x) {
  if (x.size() < 3) throw Error(ErrorKind::TooShort, "time features need at least 3 samples");
  TimeFeatures f;
  const std::size_t n = x.size() - 1;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i + 1] - x[i];
    f.line_length += std::abs(d);
    f.max_abs_change = std::max(f.max_abs_change, std::abs(d));
    mean += d;
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i + 1] - x[i] - mean;
    ss += d * d;
  }
  f.deriv_var = ss / static_cast<double>(n);
  return f;
}

double alpha_theta_ratio(std::span<const double> alpha, std::span<const double> theta) {
  auto mean = [](std::span<const double> v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  return (mean(alpha) + kRatioEpsilon) / (mean(theta) + kRatioEpsilon);
}

double emg_asymmetry(std::span<const double> channel_power, const EmgSides& sides) {
  double left = 0.0, right = 0.0;
  for (auto i : sides.left) left += channel_power[i];
  for (auto i : sides.right) right += channel_power[i];
  return (left - right) / (left + right + kRatioEpsilon);
}

// ---------------------------------------------------------------------------

FeatureExtractor::FeatureExtractor(ModalityLayout layout, ExtractorConfig cfg)
    : layout_(std::move(layout)), cfg_(std::move(cfg)) {
  registry_ = FeatureRegistry::build(layout_, cfg_.bands);
  for (auto i : cfg_.emg_sides.left)
    if (i >= layout_.emg.size()) throw Error(ErrorKind::LayoutMismatch, "EMG side channel out of range");
  for (auto i : cfg_.emg_sides.right)
    if (i >= layout_.emg.size()) throw Error(ErrorKind::LayoutMismatch, "EMG side channel out of range");
}

std::vector<double> FeatureExtractor::extract(const Epoch& epoch) const {
  std::vector<double> row(registry_.size());
  extract_into(epoch, row);
  return row;
}

void FeatureExtractor::extract_into(const Epoch& epoch, std::span<double> out) const {
  if (epoch.n_channels != layout_.total() || epoch.samples.size() != epoch.n_channels * epoch.n_samples)
    throw Error(ErrorKind::LayoutMismatch, "epoch shape does not match the extractor layout");
  if (out.size() != registry_.size())
    throw Error(ErrorKind::LayoutMismatch, "output row has the wrong length");

  const double fs = epoch.sample_rate_hz;
  std::size_t col = 0;
  std::vector<double> alpha, theta, emg_total;
  const std::size_t alpha_idx = find_band(cfg_.bands.eeg, "alpha");
  const std::size_t theta_idx = find_band(cfg_.bands.eeg, "theta");

  auto channel_features = [&](std::size_t ch, const std::vector<Band>& bands,
                              std::vector<double>& powers) {
    const auto x = epoch.channel(ch);
    const TimeFeatures t = time_features(x);
    out[col++] = t.line_length;
    out[col++] = t.deriv_var;
    out[col++] = t.max_abs_change;
    const auto psd = dsp::welch_psd(x, fs, cfg_.welch);
    powers.clear();
    for (const auto& b : bands) {
      const double p = dsp::band_power(psd, b.lo_hz, b.hi_hz).value;
      powers.push_back(p);
      out[col++] = p;
    }
  };

  std::vector<double> powers;
  for (std::size_t ch = layout_.eeg.begin; ch < layout_.eeg.end; ++ch) {
    channel_features(ch, cfg_.bands.eeg, powers);
    alpha.push_back(powers[alpha_idx]);
    theta.push_back(powers[theta_idx]);
  }
  for (std::size_t ch = layout_.emg.begin; ch < layout_.emg.end; ++ch) {
    channel_features(ch, cfg_.bands.emg, powers);
    double total = 0.0;
    for (double p : powers) total += p;
    emg_total.push_back(total);
  }
  for (std::size_t ch = layout_.gsr.begin; ch < layout_.gsr.end; ++ch)
    channel_features(ch, cfg_.bands.gsr, powers);

  out[col++] = alpha_theta_ratio(alpha, theta);
  out[col++] = emg_total.empty() ? 0.0 : emg_asymmetry(emg_total, cfg_.emg_sides);
}

FeatureMatrix FeatureExtractor::extract_batch(std::span<const Epoch> epochs, unsigned threads) const {
  FeatureMatrix m;
  m.registry = registry_;
  m.values = Matrix(epochs.size(), registry_.size());
  parallel_for(
      epochs.size(), [&](std::size_t i) { extract_into(epochs[i], m.values.row(i)); }, threads);
  for (const auto& e : epochs) {
    m.labels.push_back(e.label);
    m.subject_ids.push_back(e.subject_id);
  }
  return m;
}

// ---------------------------------------------------------------------------

namespace {

ColumnStats column_stats(const Matrix& values, std::span<const std::size_t> rows) {
  ColumnStats s;
  s.mean.assign(values.cols, 0.0);
  s.std.assign(values.cols, 0.0);
  if (rows.empty()) return s;
  for (auto r : rows)
    for (std::size_t c = 0; c < values.cols; ++c) s.mean[c] += values(r, c);
  for (auto& v : s.mean) v /= static_cast<double>(rows.size());
  for (auto r : rows)
    for (std::size_t c = 0; c < values.cols; ++c) {
      const double d = values(r, c) - s.mean[c];
      s.std[c] += d * d;
    }
  for (auto& v : s.std) v = std::sqrt(v / static_cast<double>(rows.size()));
  return s;
}

}  // namespace

NormStats fit_norm(const FeatureMatrix& m, bool per_subject, std::span<const std::size_t> rows) {
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(m.rows());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    rows = all;
  }
  NormStats stats;
  stats.feature_names = m.registry.names();
  stats.global = column_stats(m.values, rows);
  if (per_subject) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (auto r : rows) groups[m.subject_ids.at(r)].push_back(r);
    for (const auto& [subject, members] : groups)
      stats.by_subject[subject] = column_stats(m.values, members);
  }
  return stats;
}

FeatureMatrix apply_norm(const FeatureMatrix& m, const NormStats& stats) {
  if (stats.feature_names != m.registry.names())
    throw Error(ErrorKind::StatsDimensionMismatch, "normalization statistics were fit on different columns");
  FeatureMatrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const ColumnStats* s = &stats.global;
    if (stats.per_subject() && r < m.subject_ids.size()) {
      auto it = stats.by_subject.find(m.subject_ids[r]);
      if (it != stats.by_subject.end()) s = &it->second;
    }
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double sd = s->std[c];
      out.values(r, c) = sd < kConstantStd ? 0.0 : (m.values(r, c) - s->mean[c]) / sd;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_feature_csv(const std::filesystem::path& path, const FeatureMatrix& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot create " + path.string());
  for (const auto& n : m.registry.names()) out << n << ',';
  out << "label,subject_id\n";
  char buf[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m.values(r, c));
      out << buf << ',';
    }
    out << class_name(m.labels.at(r)) << ',' << m.subject_ids.at(r) << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

FeatureMatrix read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingArtifact, "cannot open " + path.string());
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t end = line.find(',', start);
      cells.push_back(line.substr(start, end == std::string::npos ? std::string::npos : end - start));
      if (end == std::string::npos) break;
      start = end + 1;
    }
    return cells;
  };

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::Io, "empty feature CSV " + path.string());
  auto header = split(line);
  if (header.size() < 2 || header[header.size() - 2] != "label" || header.back() != "subject_id")
    throw Error(ErrorKind::Io, "feature CSV header must end with label,subject_id");
  header.resize(header.size() - 2);
  FeatureMatrix m;
  m.registry = FeatureRegistry(header);
  const std::size_t cols = header.size();

  std::vector<double> data;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != cols + 2)
      throw Error(ErrorKind::Io, "feature CSV row " + std::to_string(rows) + " has wrong width", rows);
    for (std::size_t c = 0; c < cols; ++c) {
      double v = 0.0;
      const char* first = cells[c].data();
      const char* last = first + cells[c].size();
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last || !std::isfinite(v))
        throw Error(ErrorKind::NonFiniteSample, "bad value in feature CSV", rows);
      data.push_back(v);
    }
    m.labels.push_back(parse_class(cells[cols]));
    m.subject_ids.push_back(cells[cols + 1]);
    ++rows;
  }
  m.values.rows = rows;
  m.values.cols = cols;
  m.values.data = std::move(data);
  return m;
}

namespace {

nlohmann::ordered_json stats_block(const std::vector<std::string>& names, const ColumnStats& s) {
  nlohmann::ordered_json obj = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < names.size(); ++i)
    obj[names[i]] = {{"mean", s.mean[i]}, {"std", s.std[i]}};
  return obj;
}

ColumnStats parse_block(const nlohmann::ordered_json& obj, std::vector<std::string>* names) {
  ColumnStats s;
  for (const auto& [name, v] : obj.items()) {
    if (names) names->push_back(name);
    s.mean.push_back(v.at("mean").get<double>());
    s.std.push_back(v.at("std").get<double>());
  }
  return s;
}

}  // namespace

std::string norm_stats_to_json(const NormStats& stats, std::string_view config_hash) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = 1;
  if (!config_hash.empty()) doc["config_hash"] = std::string(config_hash);
  doc["features"] = stats_block(stats.feature_names, stats.global);
  if (stats.per_subject()) {
    nlohmann::ordered_json subjects = nlohmann::ordered_json::object();
    for (const auto& [subject, s] : stats.by_subject) subjects[subject] = stats_block(stats.feature_names, s);
    doc["by_subject"] = std::move(subjects);
  }
  return doc.dump(1);
}

NormStats norm_stats_from_json(std::string_view text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::SchemaVersionMismatch, std::string("normalization JSON: ") + e.what());
  }
  if (doc.value("schema_version", 0) != 1)
    throw Error(ErrorKind::SchemaVersionMismatch, "normalization JSON schema_version must be 1");
  NormStats stats;
  stats.global = parse_block(doc.at("features"), &stats.feature_names);
  if (doc.contains("by_subject"))
    for (const auto& [subject, block] : doc["by_subject"].items())
      stats.by_subject[subject] = parse_block(block, nullptr);
  return stats;
}

}  // namespace physiodecode::features
