#pragma once

#include <stdexcept>
#include <string>

namespace mvn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or precondition violation (bad hyperparameter,
/// mismatched dimension, out-of-range argument). The CLI maps this to exit 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during a computation, e.g. a zero denominator or a
/// non-finite activation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File input/output failure (unreadable IDX file, unwritable output path).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace mvn
