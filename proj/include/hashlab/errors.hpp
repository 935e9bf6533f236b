#pragma once

#include <stdexcept>
#include <string>

namespace hashlab {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent tensor or layer geometry.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf appeared in an activation, gradient or update.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Two codes or vectors that must agree in length do not.
class LengthMismatch : public Error {
 public:
  using Error::Error;
};

/// No valid triplet can be drawn, or an empty batch was supplied.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// A quantity is undefined for the given input (e.g. AP with no relevant items).
class UndefinedError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file, or unsupported version.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value; the message names the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hashlab
