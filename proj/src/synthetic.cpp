#include <algorithm>
#include <cmath>
#include <numbers>

#include "physiodecode/dataset.hpp"
#include "physiodecode/error.hpp"
#include "physiodecode/rng.hpp"

namespace physiodecode {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::uint64_t kLabelStream = 0x4c41'4245'4cULL;
constexpr std::uint64_t kEpochStream = 0x4550'4f43'48ULL;
constexpr std::uint64_t kSubjectStream = 0x5355'424aULL;

// Paul Kellet's pink-noise filter, rescaled to the requested standard deviation.
void fill_pink(Rng& rng, std::span<double> out, double std_dev) {
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  auto step = [&] {
    const double white = rng.normal();
    b0 = 0.99886 * b0 + white * 0.0555179;
    b1 = 0.99332 * b1 + white * 0.0750759;
    b2 = 0.96900 * b2 + white * 0.1538520;
    b3 = 0.86650 * b3 + white * 0.3104856;
    b4 = 0.55000 * b4 + white * 0.5329522;
    b5 = -0.7616 * b5 - white * 0.0168980;
    const double pink = b0 + b1 + b2 + b3 + b4 + b5 + b6 + white * 0.5362;
    b6 = white * 0.115926;
    return pink;
  };
  for (int i = 0; i < 256; ++i) step();
  double mean = 0;
  for (auto& v : out) {
    v = step();
    mean += v;
  }
  mean /= static_cast<double>(out.size());
  double var = 0;
  for (auto& v : out) {
    v -= mean;
    var += v * v;
  }
  const double scale = std_dev / std::sqrt(std::max(var / static_cast<double>(out.size()), 1e-300));
  for (auto& v : out) v *= scale;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double bump(double t, double center, double width) {
  const double z = (t - center) / width;
  return std::exp(-z * z);
}

}  // namespace

std::vector<BehaviorClass> synthetic_labels(const SyntheticConfig& cfg) {
  std::array<std::size_t, kNumClasses> counts{};
  counts.fill(cfg.n_per_class);
  if (cfg.class_counts) counts = *cfg.class_counts;
  std::vector<BehaviorClass> labels;
  for (int c = 0; c < kNumClasses; ++c) labels.insert(labels.end(), counts[c], class_from_ordinal(c));
  Rng rng(cfg.seed, {kLabelStream});
  rng.shuffle(std::span(labels));
  return labels;
}

Epoch synthesize_epoch(const SyntheticConfig& cfg, const ModalityLayout& layout, std::size_t index) {
  const auto labels = synthetic_labels(cfg);
  if (index >= labels.size()) throw Error(ErrorKind::ConfigInvalid, "synthetic index out of range");
  const BehaviorClass label = labels[index];
  const std::size_t n = samples_per_window(cfg.sample_rate_hz, cfg.window_s);
  const double fs = cfg.sample_rate_hz;
  const auto& amp = cfg.signature;

  Epoch epoch(layout.total(), n);
  epoch.label = label;
  epoch.sample_rate_hz = fs;
  epoch.t0_offset_s = cfg.baseline_s;
  const std::size_t subject = index % std::max<std::size_t>(cfg.n_subjects, 1);
  epoch.subject_id = "S" + std::string(subject < 9 ? "0" : "") + std::to_string(subject + 1);
  epoch.event_id = "E" + std::to_string(index);

  // Subject-level gain so per-subject normalization has something to remove.
  Rng subject_rng(cfg.seed, {kSubjectStream, subject});
  const double subject_gain = subject_rng.uniform(0.85, 1.15);

  Rng rng(cfg.seed, {kEpochStream, index});
  auto time_of = [&](std::size_t i) { return static_cast<double>(i) / fs - cfg.baseline_s; };

  // EEG: pink background + ongoing alpha rhythm (+ beta burst for Brake).
  const double alpha_hz = rng.uniform(9.5, 11.0);
  const double beta_hz = rng.uniform(18.0, 24.0);
  const double eeg_count = static_cast<double>(std::max<std::size_t>(layout.eeg.size(), 1));
  // Time courses shared by all channels; per-channel phases enter through
  // sin(a + p) = sin(a) cos(p) + cos(a) sin(p).
  std::vector<double> alpha_sin(n), alpha_cos(n), beta_sin(n, 0.0), beta_cos(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = time_of(i);
    double gate = 1.0;
    if (label == BehaviorClass::Change) gate = 1.0 - amp.eeg_alpha_suppression * logistic((t - 0.15) / 0.05);
    alpha_sin[i] = gate * std::sin(kTwoPi * alpha_hz * t);
    alpha_cos[i] = gate * std::cos(kTwoPi * alpha_hz * t);
    if (label == BehaviorClass::Brake) {
      const double env = bump(t, 0.5, 0.25);
      beta_sin[i] = env * std::sin(kTwoPi * beta_hz * t);
      beta_cos[i] = env * std::cos(kTwoPi * beta_hz * t);
    }
  }
  for (std::size_t ch = layout.eeg.begin; ch < layout.eeg.end; ++ch) {
    auto x = epoch.channel(ch);
    fill_pink(rng, x, cfg.eeg_noise_uv * subject_gain);
    const double rel = static_cast<double>(ch - layout.eeg.begin) / eeg_count;
    const double alpha_weight = 0.5 + 0.5 * rel;  // posterior channels carry more alpha
    const double beta_weight = 0.4 + 0.6 * std::exp(-std::pow((rel - 0.45) / 0.25, 2));
    const double alpha_phase = rng.uniform(0.0, kTwoPi);
    const double beta_phase = rng.uniform(0.0, kTwoPi);
    const double a_amp = cfg.eeg_alpha_uv * alpha_weight;
    const double b_amp = label == BehaviorClass::Brake ? amp.eeg_beta_uv * beta_weight : 0.0;
    const double ac = a_amp * std::cos(alpha_phase), as = a_amp * std::sin(alpha_phase);
    const double bc = b_amp * std::cos(beta_phase), bs = b_amp * std::sin(beta_phase);
    for (std::size_t i = 0; i < n; ++i)
      x[i] += ac * alpha_sin[i] + as * alpha_cos[i] + bc * beta_sin[i] + bs * beta_cos[i];
  }

  // EMG: white background with an amplitude envelope.
  const bool left_turn = rng.uniform() < 0.5;
  std::vector<double> emg_env(n);
  for (std::size_t i = 0; i < n; ++i) emg_env[i] = bump(time_of(i), 0.6, 0.35);
  for (std::size_t ch = layout.emg.begin; ch < layout.emg.end; ++ch) {
    auto x = epoch.channel(ch);
    const bool left_side = (ch - layout.emg.begin) < 2;
    for (std::size_t i = 0; i < n; ++i) {
      const double env = emg_env[i];
      double gain = 1.0;
      if (label == BehaviorClass::Turn)
        gain = (left_side == left_turn) ? 1.0 + amp.emg_turn_gain * env
                                        : std::max(0.2, 1.0 - 0.5 * env);
      else if (label == BehaviorClass::Throttle)
        gain = 1.0 + amp.emg_throttle_gain * env;
      x[i] = cfg.emg_noise_uv * subject_gain * gain * rng.normal();
    }
  }

  // GSR: tonic level, slow drift, noise, and a phasic response that is large
  // for Brake and small and random otherwise.
  const double phasic = label == BehaviorClass::Brake ? amp.gsr_phasic_us * rng.uniform(0.8, 1.2)
                                                      : amp.gsr_phasic_us * rng.uniform(0.0, 0.3);
  const double drift = rng.uniform(-0.05, 0.05);
  for (std::size_t ch = layout.gsr.begin; ch < layout.gsr.end; ++ch) {
    auto x = epoch.channel(ch);
    fill_pink(rng, x, cfg.gsr_noise_us);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = time_of(i);
      x[i] += cfg.gsr_tonic_us * subject_gain + drift * t;
      if (t > 0.0) x[i] += phasic * (1.0 - std::exp(-t / 0.4));
    }
  }
  return epoch;
}

std::vector<Epoch> generate_synthetic(const SyntheticConfig& cfg, const ModalityLayout& layout) {
  const std::size_t total = synthetic_labels(cfg).size();
  std::vector<Epoch> epochs;
  epochs.reserve(total);
  for (std::size_t i = 0; i < total; ++i) epochs.push_back(synthesize_epoch(cfg, layout, i));
  return epochs;
}

}  // namespace physiodecode
