#pragma once

#include <stdexcept>
#include <string>

namespace dmin {

// Base for every error raised by the library. The CLI maps the subclasses
// onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, divergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed input files, insufficient data, corrupt checkpoints.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dmin
