#pragma once

#include <stdexcept>
#include <string>

namespace obstacle {

// Input, format and validation failures. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable or malformed file contents (PNG, PGM, .flo, JSON).
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raster dimensions that must agree do not.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A value violates a documented constraint. `key()` names the offending
// field (config key, JSON path, ...).
class ValidationError : public Error {
 public:
  ValidationError(std::string key, std::string message)
      : Error(key + ": " + message), key_(std::move(key)), message_(std::move(message)) {}

  const std::string& key() const noexcept { return key_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string key_;
  std::string message_;
};

// Internal invariant broken; a bug rather than bad input. Exit code 2.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace obstacle
