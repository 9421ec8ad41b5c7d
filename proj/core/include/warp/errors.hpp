#pragma once

#include <stdexcept>
#include <string>

namespace warp {

/// Root of every error the harness raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or command-line input. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Dataset, manifest or image content failed validation.
class DataError : public Error {
 public:
  using Error::Error;
};

/// The detector could not be reached, timed out, or exited. Retryable.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// The detector answered with something that violates protocol v1. Not retryable.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// All retries for a single detection request were exhausted.
class DetectionFailed : public TransportError {
 public:
  using TransportError::TransportError;
};

/// A checkpoint was produced by a different configuration.
class CheckpointMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace warp
