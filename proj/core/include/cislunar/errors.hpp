#pragma once

#include <stdexcept>
#include <string>

namespace cislunar {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, invariant violations, bad arguments.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure (singularity, step-size underflow, non-convergence).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Position closer than the radius floor to a primary.
class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Observer and target (nearly) coincident.
class ZeroRangeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class PropagationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Tasking problem has no allocation meeting the coverage constraint.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace cislunar
