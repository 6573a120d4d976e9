#ifndef ATATTACK_CORE_ERROR_HPP
#define ATATTACK_CORE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace atattack {

/// Root of every exception thrown by the library. `kind()` is a stable
/// machine-readable tag used in CLI error records.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

/// A configuration document or a budget/spec object violates its contract.
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

/// Two components disagree on tensor shapes (e.g. trojan vs. target input).
class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
  const char* kind() const noexcept override { return "shape"; }
};

/// Checkpoint missing, unreadable or built for another architecture.
class CheckpointError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "checkpoint"; }
};

/// Dataset cache missing, corrupted or failing its checksum.
class DataError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "data"; }
};

/// Optimization diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "training"; }
};

/// Filesystem failures while writing artifacts.
class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

}  // namespace atattack

#endif  // ATATTACK_CORE_ERROR_HPP
