#include "physiodecode/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>

#include "physiodecode/error.hpp"

namespace physiodecode::dsp {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = std::numbers::pi;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

double hamming(std::size_t n, std::size_t len) {
  if (len == 1) return 1.0;
  return 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(n) / static_cast<double>(len - 1));
}

// Odd reflection about both end points: 2*x[0] - x[k] on the left and
// 2*x[n-1] - x[n-1-k] on the right. Reflection indices are clamped for very
// short inputs.
std::vector<double> odd_extend(std::span<const double> x, std::size_t pad) {
  const std::size_t n = x.size();
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t k = 0; k < pad; ++k) {
    const std::size_t src = std::min(pad - k, n - 1);
    ext[k] = 2.0 * x[0] - x[src];
  }
  std::copy(x.begin(), x.end(), ext.begin() + static_cast<std::ptrdiff_t>(pad));
  for (std::size_t k = 0; k < pad; ++k) {
    const std::size_t back = std::min(k + 1, n - 1);
    ext[pad + n + k] = 2.0 * x[n - 1] - x[n - 1 - back];
  }
  return ext;
}

// Per-section DF2T state reproducing the steady-state response to a unit step.
std::vector<std::array<double, 2>> steady_state(const FilterCoefficients& f) {
  std::vector<std::array<double, 2>> zi(f.sections.size());
  double scale = 1.0;
  for (std::size_t s = 0; s < f.sections.size(); ++s) {
    const auto& q = f.sections[s];
    const double g = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
    const double z1 = q.b2 - q.a2 * g;
    const double z0 = q.b1 - q.a1 * g + z1;
    zi[s] = {z0 * scale, z1 * scale};
    scale *= g;
  }
  return zi;
}

void run_sections(const FilterCoefficients& f, std::vector<double>& x,
                  std::vector<std::array<double, 2>> state) {
  for (std::size_t s = 0; s < f.sections.size(); ++s) {
    const auto& q = f.sections[s];
    double z0 = state[s][0], z1 = state[s][1];
    for (double& v : x) {
      const double in = v;
      const double out = q.b0 * in + z0;
      z0 = q.b1 * in - q.a1 * out + z1;
      z1 = q.b2 * in - q.a2 * out;
      v = out;
    }
  }
}

std::vector<std::array<double, 2>> scaled(std::vector<std::array<double, 2>> zi, double x0) {
  for (auto& z : zi) {
    z[0] *= x0;
    z[1] *= x0;
  }
  return zi;
}

// FFTW plans are created under a lock (the planner is not thread-safe) and
// executed with the new-array interface, which is.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan r2c(int n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    double* in = fftw_alloc_real(static_cast<std::size_t>(n));
    fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    fftw_free(in);
    fftw_free(out);
    plans_.emplace(n, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [n, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<int, fftw_plan> plans_;
};

struct FftwDeleter {
  void operator()(void* p) const noexcept { fftw_free(p); }
};

}  // namespace

// ---------------------------------------------------------------------------
// IIR band-pass

FilterCoefficients design_bandpass(const BandpassSpec& spec, double fs) {
  if (!(fs > 0.0) || !(spec.low_hz > 0.0) || !(spec.low_hz < spec.high_hz) ||
      !(spec.high_hz < fs / 2.0))
    throw Error(ErrorKind::InvalidBand, "band edges must satisfy 0 < low < high < fs/2");
  if (spec.order != 2 && spec.order != 4 && spec.order != 6 && spec.order != 8)
    throw Error(ErrorKind::InvalidBand, "band-pass order must be one of 2, 4, 6, 8");

  const int n = spec.order;
  const double w_lo = 2.0 * fs * std::tan(kPi * spec.low_hz / fs);
  const double w_hi = 2.0 * fs * std::tan(kPi * spec.high_hz / fs);
  const double bw = w_hi - w_lo;
  const double w0_sq = w_lo * w_hi;

  FilterCoefficients filter;
  for (int k = 0; k < n; ++k) {
    const cplx proto = std::polar(1.0, kPi * (2.0 * k + n + 1) / (2.0 * n));
    const cplx half = proto * (bw / 2.0);
    const cplx root = std::sqrt(half * half - w0_sq);
    for (const cplx s : {half + root, half - root}) {
      const cplx z = (2.0 * fs + s) / (2.0 * fs - s);
      if (z.imag() <= 0.0) continue;  // keep one pole of each conjugate pair
      Biquad q;
      q.b0 = 1.0;
      q.b1 = 0.0;
      q.b2 = -1.0;
      q.a1 = -2.0 * z.real();
      q.a2 = std::norm(z);
      filter.sections.push_back(q);
    }
  }

  // Unity gain where the analog centre frequency sqrt(w_lo * w_hi) lands.
  const double center_hz = fs / kPi * std::atan(std::sqrt(w0_sq) / (2.0 * fs));
  const double gain = magnitude_response(filter, center_hz, fs);
  const double per_section = std::pow(gain, -1.0 / static_cast<double>(filter.sections.size()));
  for (auto& q : filter.sections) {
    q.b0 *= per_section;
    q.b1 *= per_section;
    q.b2 *= per_section;
  }
  return filter;
}

double magnitude_response(const FilterCoefficients& filter, double freq_hz, double fs) {
  const cplx z1 = std::polar(1.0, -2.0 * kPi * freq_hz / fs);
  const cplx z2 = z1 * z1;
  cplx h = 1.0;
  for (const auto& q : filter.sections) h *= (q.b0 + q.b1 * z1 + q.b2 * z2) / (1.0 + q.a1 * z1 + q.a2 * z2);
  return std::abs(h);
}

std::vector<double> sosfilt(const FilterCoefficients& filter, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  run_sections(filter, y, std::vector<std::array<double, 2>>(filter.sections.size(), {0.0, 0.0}));
  return y;
}

std::vector<double> filtfilt(const FilterCoefficients& filter, std::span<const double> x) {
  if (x.empty()) return {};
  if (x.size() == 1) return {x[0] * std::pow(magnitude_response(filter, 0.0, 1.0), 2)};
  const std::size_t pad = std::min<std::size_t>(3 * (2 * filter.sections.size() + 1), x.size() - 1);
  std::vector<double> ext = odd_extend(x, pad);
  const auto zi = steady_state(filter);

  run_sections(filter, ext, scaled(zi, ext.front()));
  std::reverse(ext.begin(), ext.end());
  run_sections(filter, ext, scaled(zi, ext.front()));
  std::reverse(ext.begin(), ext.end());

  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + x.size())};
}

// ---------------------------------------------------------------------------
// FIR notch

std::vector<double> design_notch(const NotchSpec& spec, double fs) {
  if (spec.taps % 2 == 0 || spec.taps < 3)
    throw Error(ErrorKind::InvalidBand, "notch FIR needs an odd tap count >= 3");
  if (!(spec.width_hz > 0.0)) throw Error(ErrorKind::InvalidBand, "notch width must be positive");
  const std::size_t m = spec.taps;
  const double center = static_cast<double>(m - 1) / 2.0;
  std::vector<double> h(m, 0.0);
  h[(m - 1) / 2] = 1.0;

  for (double f : spec.freqs_hz) {
    const double lo = f - spec.width_hz / 2.0;
    const double hi = f + spec.width_hz / 2.0;
    if (!(lo > 0.0) || !(hi < fs / 2.0))
      throw Error(ErrorKind::InvalidBand, "notch at " + std::to_string(f) + " Hz exceeds (0, fs/2)");
    std::vector<double> bp(m);
    double response = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double t = static_cast<double>(i) - center;
      bp[i] = (2.0 * hi / fs * sinc(2.0 * hi * t / fs) - 2.0 * lo / fs * sinc(2.0 * lo * t / fs)) *
              hamming(i, m);
      response += bp[i] * std::cos(2.0 * kPi * f * t / fs);
    }
    for (std::size_t i = 0; i < m; ++i) h[i] -= bp[i] / response;
  }
  return h;
}

std::vector<double> fir_filter_centered(std::span<const double> kernel, std::span<const double> x) {
  if (x.empty()) return {};
  const std::size_t half = kernel.size() / 2;
  const std::vector<double> ext = odd_extend(x, half);
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double acc = 0.0;
    const double* window = ext.data() + i;  // ext[i .. i + 2*half] is centred on x[i]
    for (std::size_t k = 0; k < kernel.size(); ++k) acc += kernel[k] * window[kernel.size() - 1 - k];
    y[i] = acc;
  }
  return y;
}

std::vector<double> notch_fir(std::span<const double> signal, double fs, const NotchSpec& spec) {
  const auto kernel = design_notch(spec, fs);
  return fir_filter_centered(kernel, signal);
}

std::vector<double> notch_fir(std::span<const double> signal, double fs,
                              std::span<const double> freqs_hz, double width_hz) {
  NotchSpec spec;
  spec.freqs_hz.assign(freqs_hz.begin(), freqs_hz.end());
  spec.width_hz = width_hz;
  return notch_fir(signal, fs, spec);
}

// ---------------------------------------------------------------------------
// Resampling

std::vector<double> resample_to(std::span<const double> signal, double fs_in, double fs_out) {
  if (!(fs_in > 0.0) || !(fs_out > 0.0) || fs_out > fs_in)
    throw Error(ErrorKind::UnsupportedRatio, "resampling requires 0 < fs_out <= fs_in");
  if (fs_out == fs_in) return {signal.begin(), signal.end()};

  // fs_in / fs_out = down / up with both small.
  const double ratio = fs_in / fs_out;
  long up = 0, down = 0;
  for (long l = 1; l <= 64; ++l) {
    const double m = std::round(ratio * static_cast<double>(l));
    if (std::abs(m - ratio * static_cast<double>(l)) < 1e-9 * m && m <= 64.0 * 64.0) {
      up = l;
      down = static_cast<long>(m);
      break;
    }
  }
  if (up == 0) throw Error(ErrorKind::UnsupportedRatio, "fs_in / fs_out is not a small rational");
  const long g = std::gcd(up, down);
  up /= g;
  down /= g;
  if (signal.empty()) return {};

  const double fs_up = fs_in * static_cast<double>(up);
  const double cutoff = 0.45 * fs_out / fs_up;  // cycles per upsampled sample
  const long half = 20 * std::max(up, down);
  const std::size_t taps = static_cast<std::size_t>(2 * half + 1);
  std::vector<double> h(taps);
  for (std::size_t i = 0; i < taps; ++i) {
    const double t = static_cast<double>(static_cast<long>(i) - half);
    h[i] = 2.0 * cutoff * sinc(2.0 * cutoff * t) * hamming(i, taps) * static_cast<double>(up);
  }

  const std::size_t pad = static_cast<std::size_t>(half / up + 1);
  const std::vector<double> ext = odd_extend(signal, pad);
  const std::size_t n_out =
      (signal.size() - 1) * static_cast<std::size_t>(up) / static_cast<std::size_t>(down) + 1;
  std::vector<double> y(n_out, 0.0);
  for (std::size_t j = 0; j < n_out; ++j) {
    const long center = static_cast<long>(j) * down + static_cast<long>(pad) * up;
    double acc = 0.0;
    for (long k = -half; k <= half; ++k) {
      const long u = center - k;
      if (u % up != 0) continue;
      acc += h[static_cast<std::size_t>(k + half)] * ext[static_cast<std::size_t>(u / up)];
    }
    y[j] = acc;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Epoch-level operations

Epoch baseline_correct(const Epoch& epoch) {
  Epoch out = epoch;
  const auto n_pre = static_cast<std::size_t>(
      std::min<long long>(std::llround(epoch.t0_offset_s * epoch.sample_rate_hz),
                          static_cast<long long>(epoch.n_samples)));
  if (n_pre == 0) return out;
  for (std::size_t ch = 0; ch < out.n_channels; ++ch) {
    auto x = out.channel(ch);
    const double mean =
        std::accumulate(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(n_pre), 0.0) /
        static_cast<double>(n_pre);
    for (double& v : x) v -= mean;
  }
  return out;
}

namespace {

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double population_std(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

}  // namespace

std::vector<std::size_t> detect_bad_channels(const Epoch& epoch, const ModalityLayout& layout,
                                             double z_thresh, double flat_eps) {
  std::vector<std::size_t> bad;
  for (Modality m : {Modality::EEG, Modality::EMG, Modality::GSR}) {
    const auto& r = layout.range(m);
    if (r.size() == 0) continue;
    std::vector<double> log_sd;
    std::vector<std::size_t> live;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double sd = population_std(epoch.channel(r.begin + i));
      if (sd < flat_eps) {
        bad.push_back(r.begin + i);
      } else {
        log_sd.push_back(std::log10(sd));
        live.push_back(r.begin + i);
      }
    }
    if (live.size() < 3) continue;
    const double med = median_of(log_sd);
    std::vector<double> dev(log_sd.size());
    for (std::size_t i = 0; i < log_sd.size(); ++i) dev[i] = std::abs(log_sd[i] - med);
    const double scale = 1.4826 * std::max(median_of(dev), kMinLogMad);
    for (std::size_t i = 0; i < log_sd.size(); ++i)
      if (dev[i] / scale > z_thresh) bad.push_back(live[i]);
  }
  std::sort(bad.begin(), bad.end());
  return bad;
}

// ---------------------------------------------------------------------------
// Spectral estimation

std::vector<double> make_window(Window kind, std::size_t n) {
  std::vector<double> w(n);
  const double a0 = kind == Window::Hann ? 0.5 : 0.54;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = a0 - (1.0 - a0) * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

PsdResult welch_psd(std::span<const double> signal, double fs, const WelchConfig& cfg) {
  const std::size_t n = cfg.segment_len;
  if (n < 2 || !(cfg.overlap >= 0.0 && cfg.overlap < 1.0))
    throw Error(ErrorKind::ConfigInvalid, "Welch segment length must be >= 2 and overlap in [0, 1)");
  if (signal.size() < n)
    throw Error(ErrorKind::SegmentTooLong, "signal shorter than Welch segment length");

  const auto overlap = static_cast<std::size_t>(std::llround(cfg.overlap * static_cast<double>(n)));
  const std::size_t hop = std::max<std::size_t>(1, n - overlap);
  const std::size_t k_segments = (signal.size() - n) / hop + 1;
  const auto window = make_window(cfg.window, n);
  double u = 0.0;
  for (double v : window) u += v * v;
  u /= static_cast<double>(n);
  const double scale = 1.0 / (static_cast<double>(n) * u * fs * static_cast<double>(k_segments));

  const std::size_t bins = n / 2 + 1;
  PsdResult psd;
  psd.n_segments = k_segments;
  psd.freqs_hz.resize(bins);
  psd.power.assign(bins, 0.0);
  for (std::size_t k = 0; k < bins; ++k) psd.freqs_hz[k] = static_cast<double>(k) * fs / static_cast<double>(n);

  fftw_plan plan = PlanCache::instance().r2c(static_cast<int>(n));
  std::unique_ptr<double, FftwDeleter> in(fftw_alloc_real(n));
  std::unique_ptr<fftw_complex, FftwDeleter> out(fftw_alloc_complex(bins));
  for (std::size_t m = 0; m < k_segments; ++m) {
    const double* seg = signal.data() + m * hop;
    for (std::size_t i = 0; i < n; ++i) in.get()[i] = seg[i] * window[i];
    fftw_execute_dft_r2c(plan, in.get(), out.get());
    for (std::size_t k = 0; k < bins; ++k) {
      const double re = out.get()[k][0], im = out.get()[k][1];
      psd.power[k] += (re * re + im * im) * scale;
    }
  }
  const std::size_t last_doubled = n % 2 == 0 ? bins - 2 : bins - 1;
  for (std::size_t k = 1; k <= last_doubled; ++k) psd.power[k] *= 2.0;
  return psd;
}

BandPower band_power(const PsdResult& psd, double lo_hz, double hi_hz) {
  BandPower bp;
  double sum = 0.0;
  for (std::size_t k = 0; k < psd.freqs_hz.size(); ++k) {
    if (psd.freqs_hz[k] >= lo_hz && psd.freqs_hz[k] < hi_hz) {
      sum += psd.power[k];
      ++bp.bins;
    }
  }
  bp.value = bp.bins ? sum / static_cast<double>(bp.bins) : 0.0;
  return bp;
}

// ---------------------------------------------------------------------------

Epoch preprocess(const Epoch& input, const ModalityLayout& layout, const PreprocessConfig& cfg) {
  validate_epoch(input, layout);
  Epoch epoch;
  if (input.sample_rate_hz != cfg.target_rate_hz) {
    std::vector<std::vector<double>> channels(input.n_channels);
    for (std::size_t ch = 0; ch < input.n_channels; ++ch)
      channels[ch] = resample_to(input.channel(ch), input.sample_rate_hz, cfg.target_rate_hz);
    epoch = Epoch(input.n_channels, channels.empty() ? 0 : channels[0].size());
    for (std::size_t ch = 0; ch < input.n_channels; ++ch)
      std::copy(channels[ch].begin(), channels[ch].end(), epoch.channel(ch).begin());
    epoch.subject_id = input.subject_id;
    epoch.event_id = input.event_id;
    epoch.label = input.label;
    epoch.t0_offset_s = input.t0_offset_s;
    epoch.sample_rate_hz = cfg.target_rate_hz;
  } else {
    epoch = input;
  }

  const double fs = epoch.sample_rate_hz;
  const auto eeg = design_bandpass(cfg.eeg, fs);
  const auto emg = design_bandpass(cfg.emg, fs);
  const auto gsr = design_bandpass(cfg.gsr, fs);
  const auto notch = cfg.emg_notch.freqs_hz.empty() ? std::vector<double>{}
                                                    : design_notch(cfg.emg_notch, fs);

  auto apply = [&](const ChannelRange& range, const FilterCoefficients& f, bool with_notch) {
    for (std::size_t ch = range.begin; ch < range.end; ++ch) {
      auto x = epoch.channel(ch);
      std::vector<double> y = filtfilt(f, x);
      if (with_notch && !notch.empty()) y = fir_filter_centered(notch, y);
      std::copy(y.begin(), y.end(), x.begin());
    }
  };
  apply(layout.eeg, eeg, false);
  apply(layout.emg, emg, true);
  apply(layout.gsr, gsr, false);
  return cfg.baseline ? baseline_correct(epoch) : epoch;
}

}  // namespace physiodecode::dsp
