#pragma once

#include <stdexcept>
#include <string>

namespace cnre {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf appeared in a tensor.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text (interaction files, manifests, records).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Caller violated a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace cnre
