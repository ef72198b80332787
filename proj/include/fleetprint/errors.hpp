#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fleetprint {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A run violates a structural invariant (no master, unknown node, bad sample).
struct InvalidRun : Error {
  using Error::Error;
};

// No complete bucket could be extracted from a run.
struct EmptyRun : Error {
  using Error::Error;
};

// Operation requires a non-empty dataset.
struct EmptyDataset : Error {
  using Error::Error;
};

// Row width does not match the fitted width.
struct DimensionMismatch : Error {
  using Error::Error;
};

// Simulator configuration violates its invariants.
struct InvalidConfig : Error {
  using Error::Error;
};

// Malformed record in a CSV file or byte stream. Carries the 1-based line.
struct ParseError : Error {
  ParseError(std::size_t line, const std::string& reason)
      : Error("line " + std::to_string(line) + ": " + reason), line_no(line) {}
  std::size_t line_no;
};

// Underlying file or stream operation failed.
struct IoError : Error {
  using Error::Error;
};

// Training data cannot support the requested fit (e.g. a single class).
struct DegenerateData : Error {
  using Error::Error;
};

// Hyperparameter values outside their valid range.
struct InvalidParams : Error {
  using Error::Error;
};

// PCA needs at least two rows.
struct InsufficientRows : Error {
  using Error::Error;
};

// Requested more components than min(rows - 1, features).
struct NComponentsTooLarge : Error {
  using Error::Error;
};

// Cross-validation needs at least `folds` rows per class.
struct InsufficientData : Error {
  using Error::Error;
};

// Paired sequences have different lengths.
struct LengthMismatch : Error {
  using Error::Error;
};

// Metric computation over zero predictions.
struct EmptyInput : Error {
  using Error::Error;
};

// Report sets being compared do not name the same classifiers.
struct KeyMismatch : Error {
  using Error::Error;
};

// Model was trained with a different preprocessing pipeline than requested.
struct PipelineMismatch : Error {
  using Error::Error;
};

// Persisted model file is unreadable or has an unsupported version.
struct FormatError : Error {
  using Error::Error;
};

}  // namespace fleetprint
