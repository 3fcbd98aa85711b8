#pragma once

#include <stdexcept>
#include <string>

namespace hsd {

// Base class for every error raised by the library. The CLI maps the
// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or truncated file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Inconsistent data (dimension mismatch, out-of-range label, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing or mismatched network tensors.
class WeightError : public Error {
 public:
  using Error::Error;
};

// Singular systems, non-finite results.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace hsd
