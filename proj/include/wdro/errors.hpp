#pragma once

#include <stdexcept>
#include <string>

namespace wdro {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on caller-supplied parameters or data was violated.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value or could not proceed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed, or its contents did not parse.
class IoError : public Error {
 public:
  using Error::Error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace wdro
