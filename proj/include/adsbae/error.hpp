#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adsbae {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

// Violated precondition or shape mismatch between arguments.
class ContractError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf values or a numerical routine that failed to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

class UndefinedBearingError : public NumericError {
 public:
  using NumericError::NumericError;
};

class DegenerateFeatureError : public Error {
 public:
  DegenerateFeatureError(std::string feature)
      : Error("degenerate feature (zero variance): " + feature),
        feature_(std::move(feature)) {}
  const std::string& feature() const noexcept { return feature_; }

 private:
  std::string feature_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t record_index, const std::string& what)
      : Error("record " + std::to_string(record_index) + ": " + what),
        record_index_(record_index) {}
  std::size_t record_index() const noexcept { return record_index_; }

 private:
  std::size_t record_index_;
};

// Invalid or inconsistent configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

// A pipeline stage failed; wraps the underlying message with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace adsbae
