#pragma once

#include <stdexcept>
#include <string>

namespace gdw {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (unknown vertex,
/// negative radius, pq <= 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A resource guard tripped (e.g. lattice vertex count above the cap).
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A query reaches past the part of the graph that is stored faithfully.
class RangeError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a failed numerical procedure.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A trajectory does not cover the time window a functional needs.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Malformed graph or config text; the message carries the line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gdw
