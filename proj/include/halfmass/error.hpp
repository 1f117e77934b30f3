#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace halfmass {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression or metric file. `position` is a 0-based offset
/// into the source text (or a line number for metric files).
class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& message)
      : Error("parse error at " + std::to_string(position) + ": " + message),
        position_(position),
        detail_(message) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t position_;
  std::string detail_;
};

/// Evaluation outside the domain of a function (division by zero, log of a
/// non-positive number, fractional power of a negative base, r = 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The conformal factor of a flattening is not positive.
class PositivityError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A precondition on the inputs of an operation does not hold.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A metric lost positive definiteness or cannot be inverted.
class MetricError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failed to reach its residual contract.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace halfmass
