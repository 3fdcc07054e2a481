#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "physiodecode/dataset.hpp"

namespace physiodecode::dsp {

// Butterworth band-pass. `order` is the low-pass prototype order, so the
// resulting band-pass has 2*order poles realized as `order` biquads.
struct BandpassSpec {
  double low_hz = 0.5;
  double high_hz = 40.0;
  int order = 4;
};

// One biquad, direct form II transposed, a0 normalized to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

struct FilterCoefficients {
  std::vector<Biquad> sections;
};

// Analog prototype -> band-pass transform -> bilinear transform with
// pre-warped edges; gain normalized to 1 at the geometric band centre.
// Throws InvalidBand unless 0 < low < high < fs/2 and order is in {2,4,6,8}.
FilterCoefficients design_bandpass(const BandpassSpec& spec, double fs);

// Single causal pass with zero initial state.
std::vector<double> sosfilt(const FilterCoefficients& filter, std::span<const double> x);

// Zero-phase forward-backward application. The signal is extended by odd
// reflection (3 * (2 * sections + 1) samples, capped at len - 1) and each pass
// starts from the steady-state response to its first sample.
std::vector<double> filtfilt(const FilterCoefficients& filter, std::span<const double> x);

// Complex frequency response magnitude at `freq_hz` (single pass).
double magnitude_response(const FilterCoefficients& filter, double freq_hz, double fs);

// Linear-phase band-stop FIR: delta minus a sum of Hamming-windowed sinc
// band-passes (one per notch, each rescaled to unit gain at its centre so the
// notch is exact). Odd tap count; centred convolution keeps the output
// time-aligned and the same length as the input.
struct NotchSpec {
  std::vector<double> freqs_hz = {50.0, 100.0, 150.0, 200.0};
  double width_hz = 2.0;
  std::size_t taps = 501;
};

std::vector<double> design_notch(const NotchSpec& spec, double fs);
std::vector<double> notch_fir(std::span<const double> signal, double fs, const NotchSpec& spec);
std::vector<double> notch_fir(std::span<const double> signal, double fs,
                              std::span<const double> freqs_hz, double width_hz);

// Zero-phase FIR application with odd-reflection padding of half the kernel.
std::vector<double> fir_filter_centered(std::span<const double> kernel, std::span<const double> x);

// Rational resampling fs_in -> fs_out (fs_out <= fs_in): zero-stuff by L,
// low-pass at 0.45 * fs_out, keep every M-th sample. Output length is
// floor((n - 1) * L / M) + 1. Throws UnsupportedRatio when fs_in/fs_out is not
// a ratio with denominator and numerator <= 64 or fs_out > fs_in.
std::vector<double> resample_to(std::span<const double> signal, double fs_in, double fs_out);

// Subtracts, per channel, the mean over the pre-event samples [0, round(t0*fs)).
Epoch baseline_correct(const Epoch& epoch);

// Robust screening per modality group: a channel is flagged when its standard
// deviation is below flat_eps, or when the robust z-score of log10(std),
// |l - median| / (1.4826 * max(MAD, kMinLogMad)), exceeds z_thresh among the
// non-flat channels of the same modality. Returned indices are ascending.
inline constexpr double kMinLogMad = 0.05;
std::vector<std::size_t> detect_bad_channels(const Epoch& epoch, const ModalityLayout& layout,
                                             double z_thresh, double flat_eps);

enum class Window { Hann, Hamming };

struct WelchConfig {
  std::size_t segment_len = 256;
  double overlap = 0.5;
  Window window = Window::Hann;
};

struct PsdResult {
  std::vector<double> freqs_hz;
  std::vector<double> power;  // amplitude^2 / Hz, one-sided
  std::size_t n_segments = 0;

  double resolution_hz() const noexcept {
    return freqs_hz.size() > 1 ? freqs_hz[1] - freqs_hz[0] : 0.0;
  }
};

// Periodic (DFT-even) window of length n, the usual choice for spectral
// estimation.
std::vector<double> make_window(Window kind, std::size_t n);

// Welch estimate: K segments spaced by hop = N - round(overlap * N), each
// windowed, |DFT|^2 scaled by 1 / (N * U * fs) with U = mean(w^2), averaged;
// interior bins doubled for the one-sided spectrum. No detrending.
// Throws SegmentTooLong when the signal is shorter than N.
PsdResult welch_psd(std::span<const double> signal, double fs, const WelchConfig& cfg);

struct BandPower {
  double value = 0.0;
  std::size_t bins = 0;
  bool empty() const noexcept { return bins == 0; }
};

// Mean PSD over bins with lo <= f < hi.
BandPower band_power(const PsdResult& psd, double lo_hz, double hi_hz);

// Per-modality preprocessing applied before feature extraction.
struct PreprocessConfig {
  BandpassSpec eeg{0.5, 40.0, 4};
  BandpassSpec emg{20.0, 240.0, 4};
  BandpassSpec gsr{0.1, 35.0, 4};
  NotchSpec emg_notch;
  double target_rate_hz = kDefaultSampleRateHz;
  bool baseline = true;
};

// Resample (if needed), filter each modality, then baseline-correct.
Epoch preprocess(const Epoch& epoch, const ModalityLayout& layout, const PreprocessConfig& cfg);

}  // namespace physiodecode::dsp
