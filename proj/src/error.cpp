#include "ecgx/error.hpp"

namespace ecgx {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "Io";
    case ErrorKind::Usage: return "Usage";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::CorruptRecord: return "CorruptRecord";
    case ErrorKind::UnknownLead: return "UnknownLead";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvalidFilter: return "InvalidFilter";
    case ErrorKind::UnsupportedResample: return "UnsupportedResample";
    case ErrorKind::MissingLead: return "MissingLead";
    case ErrorKind::UnfittedFeature: return "UnfittedFeature";
    case ErrorKind::ShapeError: return "ShapeError";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::UnknownFeature: return "UnknownFeature";
    case ErrorKind::OddFeatureCount: return "OddFeatureCount";
    case ErrorKind::InvalidGroupSize: return "InvalidGroupSize";
    case ErrorKind::UndefinedPcc: return "UndefinedPcc";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::IncompleteScores: return "IncompleteScores";
    case ErrorKind::NoOverlap: return "NoOverlap";
    case ErrorKind::NumericFailure: return "NumericFailure";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

}  // namespace ecgx
