#pragma once

#include <stdexcept>
#include <string>

namespace evodiff {

// Numeric values double as CLI exit codes.
enum class ErrorCode : int {
  kInternal = 1,
  kConfig = 2,
  kNumeric = 3,
  kFitness = 4,
  kIo = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::kConfig, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCode::kNumeric, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

/// Raised when a fitness evaluation fails or returns a non-finite value.
/// Carries the denoising step and population index when known (-1 otherwise).
class FitnessError : public Error {
 public:
  FitnessError(const std::string& what, int step = -1, int sample = -1)
      : Error(ErrorCode::kFitness, what), step_(step), sample_(sample) {}

  int step() const noexcept { return step_; }
  int sample() const noexcept { return sample_; }

 private:
  int step_;
  int sample_;
};

}  // namespace evodiff
