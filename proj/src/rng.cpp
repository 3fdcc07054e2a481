#include "physiodecode/rng.hpp"

#include <cmath>

#include "physiodecode/error.hpp"

namespace physiodecode {

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) noexcept {
  std::uint64_t h = mix64(seed + Rng::kGolden);
  for (std::uint64_t id : ids) h = mix64(h ^ mix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = next();
  } while (r >= limit);
  return r % n;
}

double Rng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MagicMismatch: return "MagicMismatch";
    case ErrorKind::VersionUnsupported: return "VersionUnsupported";
    case ErrorKind::ChannelCountMismatch: return "ChannelCountMismatch";
    case ErrorKind::NonFiniteSample: return "NonFiniteSample";
    case ErrorKind::ClassTooSmall: return "ClassTooSmall";
    case ErrorKind::InvalidBand: return "InvalidBand";
    case ErrorKind::UnsupportedRatio: return "UnsupportedRatio";
    case ErrorKind::SegmentTooLong: return "SegmentTooLong";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::LayoutMismatch: return "LayoutMismatch";
    case ErrorKind::StatsDimensionMismatch: return "StatsDimensionMismatch";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::FeatureMismatch: return "FeatureMismatch";
    case ErrorKind::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorKind::EmptySpace: return "EmptySpace";
    case ErrorKind::RegistryMismatch: return "RegistryMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace physiodecode
