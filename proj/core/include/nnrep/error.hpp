#pragma once

#include <stdexcept>
#include <string>

namespace nnrep {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file content (model, predicate, CSV).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Shapes that do not line up (layer widths, vector lengths).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Non-finite or otherwise unusable numbers produced during a computation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace nnrep
