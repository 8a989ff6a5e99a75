#pragma once

#include <stdexcept>
#include <string>

namespace cesium {

/// Base of every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad argument, bad request, invalid data).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed, or its contents are corrupt.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A stored artifact does not parse or fails an integrity check.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace cesium
