#pragma once

#include <stdexcept>
#include <string>

namespace pnp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes of two operands (or a kernel and a field) are incompatible.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The requested operation is not defined for this object (e.g. the
/// gradient of an indicator fidelity).
class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, runaway backtracking, divergent training.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pnp
