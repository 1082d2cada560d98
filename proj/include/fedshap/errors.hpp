#pragma once

#include <stdexcept>
#include <string>

namespace fedshap {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid caller-supplied data (empty dataset, too few samples, ...).
class InputError : public Error {
public:
  using Error::Error;
};

/// Structurally incompatible configuration (layout mismatch, missing hook, ...).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// File ingestion failure; messages name the offending field and byte offset.
class IngestError : public Error {
public:
  using Error::Error;
};

/// Numerical failure during training (non-finite gradients or parameters).
class TrainingError : public Error {
public:
  using Error::Error;
};

/// Problem size exceeds a hard bound of the chosen algorithm.
class CapacityError : public Error {
public:
  using Error::Error;
};

/// Internal contract violation.
class LogicError : public Error {
public:
  using Error::Error;
};

/// Utility evaluation failed inside a Shapley computation; carries the subset.
class EvalError : public Error {
public:
  using Error::Error;
};

}  // namespace fedshap
