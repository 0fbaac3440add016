#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ecgx {

enum class ErrorKind {
  Io,
  Usage,
  UnsupportedFormat,
  CorruptRecord,
  UnknownLead,
  DuplicateId,
  ParseError,
  InvalidFilter,
  UnsupportedResample,
  MissingLead,
  UnfittedFeature,
  ShapeError,
  EmptyBatch,
  ConfigError,
  EmptyDataset,
  UnknownFeature,
  OddFeatureCount,
  InvalidGroupSize,
  UndefinedPcc,
  InsufficientData,
  IncompleteScores,
  NoOverlap,
  NumericFailure,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ecgx
