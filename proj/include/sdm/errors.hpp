#pragma once

#include <stdexcept>
#include <string>

namespace sdm {

/// Base of every error raised by the library. `exit_code()` is the process
/// exit status the command-line front end reports for it.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// A coordinate or site lies outside the knot-grid domain.
class DomainError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// An argument violates a documented precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed or insufficient input data (CSV, model or config files).
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Factorization failure, singular system or degenerate decomposition.
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// A model fit (variogram, MDS loop, alternating estimator) failed.
class FitError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Gauge fixing impossible (all fitted coordinates coincide).
class GaugeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// No coefficient pair satisfying the non-folding constraints is available.
class InfeasibleError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace sdm
