#pragma once

#include <stdexcept>
#include <string>

namespace szgan {

/// Base of every error raised by the library. `exit_code()` is what the CLI returns.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Tensor shapes that do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Operation called in the wrong lifecycle state (backward before forward, step without gradients).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the accepted domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Malformed input data. Messages carry a byte offset or row/column when known.
class ParseError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Training produced a non-finite or runaway loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const noexcept { return step_; }
  int exit_code() const noexcept override { return 4; }

 private:
  long step_;
};

/// A checkpoint, cache or report expected on disk is absent.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 5; }
};

/// A file could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

}  // namespace szgan
