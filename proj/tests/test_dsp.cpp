#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "physiodecode/dsp.hpp"
#include "physiodecode/error.hpp"
#include "physiodecode/rng.hpp"

using namespace physiodecode;
using namespace physiodecode::dsp;

namespace {

constexpr double kFs = 500.0;

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::Io;
}

// Steady-state amplitude ratio of the zero-phase band-pass at `freq_hz`.
double bandpass_gain(const FilterCoefficients& f, double freq_hz, double seconds = 10.0, double skip_s = 1.0) {
  const auto n = static_cast<std::size_t>(seconds * kFs);
  const auto x = oracle::sinusoid(freq_hz, kFs, n);
  const auto y = filtfilt(f, x);
  const auto skip = static_cast<std::size_t>(skip_s * kFs);
  return oracle::tone_amplitude(y, freq_hz, kFs, skip) / oracle::tone_amplitude(x, freq_hz, kFs, skip);
}

std::vector<double> white_noise(std::uint64_t seed, std::size_t n, double sd = 1.0) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = sd * rng.normal();
  return x;
}

}  // namespace

TEST_CASE("band-pass design validates its band") {
  CHECK(kind_of([] { design_bandpass({0.0, 40.0, 4}, kFs); }) == ErrorKind::InvalidBand);
  CHECK(kind_of([] { design_bandpass({30.0, 20.0, 4}, kFs); }) == ErrorKind::InvalidBand);
  CHECK(kind_of([] { design_bandpass({0.5, 260.0, 4}, kFs); }) == ErrorKind::InvalidBand);
  CHECK(kind_of([] { design_bandpass({0.5, 40.0, 3}, kFs); }) == ErrorKind::InvalidBand);
  CHECK(design_bandpass({0.5, 40.0, 4}, kFs).sections.size() == 4);
}

TEST_CASE("band-pass passband, stopband and edges") {
  const auto f = design_bandpass({0.5, 40.0, 4}, kFs);
  const double g20 = bandpass_gain(f, 20.0);
  CHECK(g20 >= 0.95);
  CHECK(g20 <= 1.05);
  CHECK(bandpass_gain(f, 100.0) <= 0.01);
  for (double hz = 2.0; hz <= 28.0; hz += 1.0) {
    const double g = bandpass_gain(f, hz);
    CHECK_MESSAGE(std::abs(g - 1.0) <= 0.05, "passband gain at " << hz << " Hz: " << g);
  }

  // Two -3 dB passes give -6 dB at each edge.
  const double lo_db = 20.0 * std::log10(bandpass_gain(f, 0.5, 80.0, 20.0));
  const double hi_db = 20.0 * std::log10(bandpass_gain(f, 40.0));
  CHECK(std::abs(lo_db + 6.02) <= 1.0);
  CHECK(std::abs(hi_db + 6.02) <= 1.0);

  CHECK(magnitude_response(f, std::sqrt(0.5 * 40.0), kFs) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("filters map zero to zero and are linear") {
  const auto f = design_bandpass({0.5, 40.0, 4}, kFs);
  const std::vector<double> zero(777, 0.0);
  for (double v : filtfilt(f, zero)) CHECK(v == 0.0);
  for (double v : notch_fir(zero, kFs, NotchSpec{})) CHECK(v == 0.0);

  const auto x = white_noise(1, 2000);
  const auto y = white_noise(2, 2000);
  const double a = 2.5, b = -0.75;
  std::vector<double> mix(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * y[i];

  const auto check_linear = [&](const std::function<std::vector<double>(const std::vector<double>&)>& op) {
    const auto fx = op(x), fy = op(y), fm = op(mix);
    double scale = 0.0, err = 0.0;
    for (std::size_t i = 0; i < fm.size(); ++i) {
      scale = std::max(scale, std::abs(fm[i]));
      err = std::max(err, std::abs(fm[i] - (a * fx[i] + b * fy[i])));
    }
    CHECK(err <= 1e-9 * scale);
  };
  check_linear([&](const std::vector<double>& s) { return filtfilt(f, s); });
  check_linear([&](const std::vector<double>& s) { return notch_fir(s, kFs, NotchSpec{}); });
  check_linear([&](const std::vector<double>& s) { return resample_to(s, 1000.0, 500.0); });
}

TEST_CASE("forward-backward filtering has zero phase") {
  const auto f = design_bandpass({0.5, 40.0, 4}, kFs);
  const auto a = oracle::sinusoid(7.0, kFs, 5000);
  const auto b = oracle::sinusoid(17.0, kFs, 5000, 0.5, 1.0);
  std::vector<double> x(a.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = a[i] + b[i];
  const auto y = filtfilt(f, x);
  int best_lag = 0;
  double best = -1e300;
  for (int lag = -25; lag <= 25; ++lag) {
    double acc = 0.0;
    for (std::size_t i = 500; i + 500 < x.size(); ++i) acc += x[i] * y[static_cast<std::size_t>(static_cast<long>(i) + lag)];
    if (acc > best) {
      best = acc;
      best_lag = lag;
    }
  }
  CHECK(best_lag == 0);
}

TEST_CASE("notch removes mains harmonics and keeps 30 Hz") {
  const NotchSpec spec;
  for (double hz : {50.0, 100.0, 150.0, 200.0}) {
    const auto x = oracle::sinusoid(hz, kFs, 5000);
    const auto y = notch_fir(x, kFs, spec);
    CHECK(y.size() == x.size());
    const double residual = oracle::rms(y, 300) / oracle::rms(x, 300);
    CHECK_MESSAGE(residual <= 0.01, "residual at " << hz << " Hz: " << residual);
  }
  const auto x = oracle::sinusoid(30.0, kFs, 5000);
  const double kept = oracle::rms(notch_fir(x, kFs, spec), 300) / oracle::rms(x, 300);
  CHECK(std::abs(kept - 1.0) <= 0.02);

  const std::vector<double> bad = {260.0};
  CHECK(kind_of([&] { notch_fir(x, kFs, bad, 2.0); }) == ErrorKind::InvalidBand);
}

TEST_CASE("rational resampling") {
  const auto x = oracle::sinusoid(10.0, 1000.0, 2001);
  const auto y = resample_to(x, 1000.0, 500.0);
  CHECK(y.size() == 1001);
  CHECK(oracle::rms(y, 100) / oracle::rms(x, 200) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(resample_to(x, 1000.0, 1000.0) == x);
  CHECK(kind_of([&] { resample_to(x, 500.0, 1000.0); }) == ErrorKind::UnsupportedRatio);
  CHECK(kind_of([&] { resample_to(x, 1000.0, 997.0); }) == ErrorKind::UnsupportedRatio);
}

TEST_CASE("baseline correction") {
  Epoch e(2, 1001);
  for (std::size_t i = 0; i < 1001; ++i) {
    e.channel(0)[i] = 7.0;
    e.channel(1)[i] = 3.0 + std::sin(static_cast<double>(i) / kFs);
  }
  const auto c = baseline_correct(e);
  for (double v : c.channel(0)) CHECK(v == 0.0);
  const auto pre = static_cast<std::size_t>(std::lround(e.t0_offset_s * kFs));
  double mean = 0.0;
  for (std::size_t i = 0; i < pre; ++i) mean += c.channel(1)[i];
  CHECK(std::abs(mean / static_cast<double>(pre)) <= 1e-9 * 3.0);

  const auto twice = baseline_correct(c);
  for (std::size_t i = 0; i < c.samples.size(); ++i) CHECK(std::abs(twice.samples[i] - c.samples[i]) <= 1e-12);
}

TEST_CASE("bad-channel screening") {
  const auto layout = ModalityLayout::canonical();
  Epoch e(layout.total(), 1001);
  Rng rng(4);
  for (auto& v : e.samples) v = rng.normal();

  CHECK(detect_bad_channels(e, layout, 5.0, 1e-6).empty());

  auto loud = e;
  for (auto& v : loud.channel(17)) v *= 50.0;
  CHECK(detect_bad_channels(loud, layout, 5.0, 1e-6) == std::vector<std::size_t>{17});

  auto flat = e;
  for (auto& v : flat.channel(3)) v = 0.0;
  CHECK(detect_bad_channels(flat, layout, 5.0, 1e-6) == std::vector<std::size_t>{3});

  // Identical channels: zero spread, only the flatline rule can fire.
  Epoch same(layout.total(), 1001);
  for (std::size_t ch = 0; ch < layout.total(); ++ch)
    for (std::size_t i = 0; i < 1001; ++i) same.channel(ch)[i] = std::sin(0.01 * static_cast<double>(i));
  CHECK(detect_bad_channels(same, layout, 5.0, 1e-6).empty());
}

TEST_CASE("Welch estimate on zero and scaled signals") {
  const WelchConfig cfg;
  const std::vector<double> zero(1001, 0.0);
  const auto psd = welch_psd(zero, kFs, cfg);
  CHECK(psd.freqs_hz.size() == 129);
  CHECK(psd.power.size() == 129);
  CHECK(psd.n_segments == (1001 - 256) / 128 + 1);
  for (double p : psd.power) CHECK(p == 0.0);

  const auto x = white_noise(12, 1001);
  std::vector<double> x2(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) x2[i] = 2.0 * x[i];
  const auto p1 = welch_psd(x, kFs, cfg);
  const auto p2 = welch_psd(x2, kFs, cfg);
  for (std::size_t k = 0; k < p1.power.size(); ++k) {
    CHECK(p1.power[k] >= 0.0);
    CHECK(std::abs(p2.power[k] - 4.0 * p1.power[k]) <= 1e-9 * std::max(1e-300, 4.0 * p1.power[k]));
  }
  CHECK(std::is_sorted(p1.freqs_hz.begin(), p1.freqs_hz.end()));

  CHECK(kind_of([&] { welch_psd(std::vector<double>(100, 0.0), kFs, cfg); }) == ErrorKind::SegmentTooLong);
}

TEST_CASE("Welch peak location and alpha dominance for a 10 Hz sinusoid") {
  const auto x = oracle::sinusoid(10.0, kFs, 1001);
  const auto psd = welch_psd(x, kFs, WelchConfig{});
  const auto peak = std::max_element(psd.power.begin(), psd.power.end()) - psd.power.begin();
  CHECK(std::abs(psd.freqs_hz[static_cast<std::size_t>(peak)] - 10.0) <= kFs / 256.0);

  // Power in the resolution cells [f - df/2, f + df/2) that meet 8-13 Hz.
  const double df = psd.resolution_hz();
  double in_band = 0.0, total = 0.0;
  for (std::size_t k = 0; k < psd.power.size(); ++k) {
    total += psd.power[k];
    const double f = psd.freqs_hz[k];
    if (f + df / 2.0 > 8.0 && f - df / 2.0 < 13.0) in_band += psd.power[k];
  }
  CHECK(in_band / total >= 0.95);
}

TEST_CASE("Welch satisfies Parseval on white noise") {
  std::vector<double> ratios;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const double sd = 3.0;
    const auto x = white_noise(1000 + seed, 1001, sd);
    const auto psd = welch_psd(x, kFs, WelchConfig{});
    double area = 0.0;
    for (double p : psd.power) area += p * psd.resolution_hz();
    ratios.push_back(area / (sd * sd));
  }
  CHECK(std::abs(oracle::median(ratios) - 1.0) <= 0.10);
}

TEST_CASE("band power averages the bins inside the band") {
  PsdResult psd;
  for (int k = 0; k <= 128; ++k) {
    psd.freqs_hz.push_back(k * kFs / 256.0);
    psd.power.push_back(0.0);
  }
  psd.power[5] = 6.0;  // 9.77 Hz
  const auto alpha = band_power(psd, 8.0, 13.0);
  std::size_t bins = 0;
  for (double f : psd.freqs_hz) bins += (f >= 8.0 && f < 13.0) ? 1 : 0;
  CHECK(alpha.bins == bins);
  CHECK(alpha.value == doctest::Approx(6.0 / static_cast<double>(bins)));

  const auto empty = band_power(psd, 300.0, 400.0);
  CHECK(empty.empty());
  CHECK(empty.value == 0.0);

  const auto slow = welch_psd(oracle::sinusoid(2.0, kFs, 1001), kFs, WelchConfig{});
  CHECK(band_power(slow, 0.5, 4.0).value >= 10.0 * band_power(slow, 8.0, 13.0).value);
}

TEST_CASE("periodic windows") {
  const auto hann = make_window(Window::Hann, 8);
  CHECK(hann[0] == doctest::Approx(0.0));
  CHECK(hann[4] == doctest::Approx(1.0));
  const auto hamming = make_window(Window::Hamming, 8);
  CHECK(hamming[0] == doctest::Approx(0.08));
}
