#pragma once

#include <stdexcept>
#include <string>

namespace fetalnet {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A tensor or array arrived with dimensions that do not match the layer contract.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration detected before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dataset, manifest or image content that cannot be used.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Caller passed a value outside the operation's domain (e.g. an empty clip).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Checkpoint does not match the configuration it is loaded against.
class CheckpointMismatch : public Error {
 public:
  using Error::Error;
};

/// Geometric fit could not be computed from the supplied points.
class FitFailure : public Error {
 public:
  using Error::Error;
};

/// Phantom geometry does not fit inside the frame.
class SpecError : public Error {
 public:
  using Error::Error;
};

}  // namespace fetalnet
