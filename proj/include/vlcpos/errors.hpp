// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace vlcpos {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Coincident points or other geometry with no defined direction.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Scene, grid or run configuration that violates an invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Impulse response with no usable peak.
class SignalError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or corrupted serialized data.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Vector lengths that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

}  // namespace vlcpos
