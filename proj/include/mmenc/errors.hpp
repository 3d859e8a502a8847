#pragma once

#include <stdexcept>
#include <string>

namespace mmenc {

// Shapes that do not line up (matmul inner dims, patch grid, checkpoint vs dataset dims).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Caller broke a precondition (non-scalar loss, t < 2, n < k, empty fold).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input data content is invalid (token id out of range, unknown ROI name).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration value or key is invalid.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation is not available for this input (e.g. noise ceiling without ground truth).
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// On-disk container problems. Each subclass is a distinct failure mode.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ShapeDisagreementError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace mmenc
