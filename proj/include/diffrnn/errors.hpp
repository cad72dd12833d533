#pragma once

#include <stdexcept>
#include <string>

namespace diffrnn {

// Malformed or inconsistent configuration (bad flag values, invalid schedules).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Shape mismatch between parameters, datasets, or auxiliary variables.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// File-level problems: missing files, bad magic, truncation, version mismatch.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values produced during evaluation or training; the message
// carries the location (sequence, time step, or stage/epoch).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Requested operation has no defined closed form for the configured kind.
class UnsupportedOperationError : public std::logic_error {
 public:
  explicit UnsupportedOperationError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace diffrnn
