#pragma once

#include <stdexcept>
#include <string>

namespace diagfuse {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor or mask dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, diverged optimization or training.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Missing or malformed files, inconsistent datasets, unreachable targets.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace diagfuse
