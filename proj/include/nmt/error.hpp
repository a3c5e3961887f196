#pragma once

#include <stdexcept>
#include <string>

namespace nmt {

// Base class for all toolkit errors. CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad or inconsistent input data: misaligned files, empty corpora,
// malformed vocab/merge/checkpoint files, artifact mismatches.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

// Tensor shape/dimension violations.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Failures inside the training loop (non-finite loss, NaN gradients).
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& msg) : Error(msg) {}
};

// File system failures.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace nmt
