#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace physiodecode {

// Every failure the library reports carries one of these kinds so callers
// (and the CLI exit-code mapping) can branch without parsing messages.
enum class ErrorKind {
  // dataset
  MagicMismatch,
  VersionUnsupported,
  ChannelCountMismatch,
  NonFiniteSample,
  ClassTooSmall,
  // dsp
  InvalidBand,
  UnsupportedRatio,
  SegmentTooLong,
  // features
  TooShort,
  LayoutMismatch,
  StatsDimensionMismatch,
  // gbdt / shap
  EmptyClass,
  DegenerateData,
  FeatureMismatch,
  SchemaVersionMismatch,
  // tpe
  EmptySpace,
  // ensemble / eval
  RegistryMismatch,
  LengthMismatch,
  EmptyMask,
  // cli
  MissingArtifact,
  ConfigInvalid,
  Io,
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> record = std::nullopt)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind),
        record_(record) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Offending record (epoch) index, when the error is tied to one.
  std::optional<std::size_t> record() const noexcept { return record_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> record_;
};

}  // namespace physiodecode
