#pragma once

#include <stdexcept>
#include <string>

namespace deepsom {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent shapes, invalid parameters, bad geometry.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input files and datasets.
class DataError : public Error {
 public:
  using Error::Error;
};

/// NaN or other non-finite values reaching an activation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Label assignment could not produce a usable map.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint files that fail validation.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace deepsom
