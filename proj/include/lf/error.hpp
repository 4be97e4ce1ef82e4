#pragma once

#include <stdexcept>
#include <string>

namespace lf {

// Invalid arguments or unsupported configurations (CLI exit code 1).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Shape/dimension mismatches between tensors.
class ShapeError : public UsageError {
 public:
  using UsageError::UsageError;
};

// Bad input files: corrupt checkpoints, empty corpora, unknown config keys
// (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values, failed tolerance checks, timer resolution too coarse
// (CLI exit code 3).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lf
