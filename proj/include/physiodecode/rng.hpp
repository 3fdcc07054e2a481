#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <utility>

namespace physiodecode {

// SplitMix64 finalizer (Steele, Lea & Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Folds a seed and any number of stream identifiers into one 64-bit key.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) noexcept;

// Counter-based generator: output k is mix64(key + k * golden). The stream is
// fully determined by the key, identical on every platform, and cheap to fork
// with derive_seed. Distributions are implemented here rather than via <random>
// because the standard distributions are not reproducible across libraries.
class Rng {
 public:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  explicit Rng(std::uint64_t key) noexcept : key_(key) {}
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) noexcept
      : key_(derive_seed(seed, ids)) {}

  std::uint64_t next() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); unbiased (rejection on the top range).
  std::uint64_t below(std::uint64_t n) noexcept;

  // Standard normal via the Marsaglia polar method; variates come in pairs.
  double normal() noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace physiodecode
