#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gazegan {

enum class ErrorKind {
  // dataset pipeline
  MissingModelFile,
  LandmarkFailure,
  DegenerateRegion,
  InvalidLabel,
  MissingImage,
  MalformedRow,
  DuplicateFilename,
  // engine
  InvalidConfig,
  DomainError,
  ShapeMismatch,
  NonFiniteLoss,
  EmptyDomain,
  UnknownLayerName,
  CorruptCheckpoint,
  // calibration
  GridOverflow,
  InsufficientSamples,
  RankDeficient,
  TooFewPoints,
  MissingTarget,
  // service
  PipelineNotReady,
  PortInUse,
  // cli
  UsageError,
  ConfigError,
  DataError,
  Io,
};

/// Coarse grouping used to pick a process exit code.
enum class ErrorFamily { Usage, Config, Data, Runtime };

std::string_view to_string(ErrorKind kind);
ErrorFamily family_of(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorFamily family() const noexcept { return family_of(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace gazegan
