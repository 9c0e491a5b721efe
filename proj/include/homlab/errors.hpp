#pragma once

#include <stdexcept>
#include <string>

namespace homlab {

/// Base class of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The time grid cannot represent the requested carrier or LO frequency.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// Two signals that must share a grid do not.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A normalizing denominator vanished.
class NormalizationError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Config file or command line could not be turned into a valid experiment.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace homlab
