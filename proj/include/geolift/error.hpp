#ifndef GEOLIFT_ERROR_HPP
#define GEOLIFT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace geolift {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: malformed files, invalid parameters, inconsistent shapes.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Requested dimension does not fit the data (e.g. p > n).
class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Configuration document problems (unknown keys, wrong types).
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// The input is well formed but the data cannot support the request:
/// disconnected graphs, zero-variance series, infinite distances.
class DataError : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical routine did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A kernel violates a hypothesis needed by a geometric routine
/// (non positive-definite metric, non-positive psi integrand, ...).
class KernelAssumptionError : public DataError {
 public:
  using DataError::DataError;
};

/// Operation is not available for the given kernel variant.
class UnsupportedVariantError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace geolift

#endif  // GEOLIFT_ERROR_HPP
