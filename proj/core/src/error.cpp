#include "gazegan/error.hpp"

namespace gazegan {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingModelFile: return "MissingModelFile";
    case ErrorKind::LandmarkFailure: return "LandmarkFailure";
    case ErrorKind::DegenerateRegion: return "DegenerateRegion";
    case ErrorKind::InvalidLabel: return "InvalidLabel";
    case ErrorKind::MissingImage: return "MissingImage";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::DuplicateFilename: return "DuplicateFilename";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::EmptyDomain: return "EmptyDomain";
    case ErrorKind::UnknownLayerName: return "UnknownLayerName";
    case ErrorKind::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorKind::GridOverflow: return "GridOverflow";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::MissingTarget: return "MissingTarget";
    case ErrorKind::PipelineNotReady: return "PipelineNotReady";
    case ErrorKind::PortInUse: return "PortInUse";
    case ErrorKind::UsageError: return "UsageError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::DataError: return "DataError";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

ErrorFamily family_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UsageError:
      return ErrorFamily::Usage;
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidConfig:
    case ErrorKind::MissingModelFile:
    case ErrorKind::UnknownLayerName:
    case ErrorKind::CorruptCheckpoint:
    case ErrorKind::GridOverflow:
      return ErrorFamily::Config;
    case ErrorKind::DataError:
    case ErrorKind::MissingImage:
    case ErrorKind::MalformedRow:
    case ErrorKind::DuplicateFilename:
    case ErrorKind::InvalidLabel:
    case ErrorKind::EmptyDomain:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::InsufficientSamples:
    case ErrorKind::RankDeficient:
    case ErrorKind::TooFewPoints:
    case ErrorKind::MissingTarget:
    case ErrorKind::DegenerateRegion:
    case ErrorKind::LandmarkFailure:
      return ErrorFamily::Data;
    default:
      return ErrorFamily::Runtime;
  }
}

}  // namespace gazegan
