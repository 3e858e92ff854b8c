#pragma once

#include <stdexcept>
#include <string>

namespace rbl {

// Base for all recoverable errors raised by the library. The CLI maps the two
// subclass families onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user configuration (flags, config file, SimConfig fields).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad or insufficient input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class MalformedRecord : public DataError {
 public:
  using DataError::DataError;
};

class TooFewObservations : public DataError {
 public:
  using DataError::DataError;
};

class LengthMismatch : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace rbl
