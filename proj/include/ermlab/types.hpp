#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ermlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input vector or matrix has the wrong shape for the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument is outside the documented range of the operation.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// The requested operation is not defined for this body kind or argument.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver stopped at its iteration cap. `residual` carries the
/// last stationarity/feasibility measure so callers can decide what to do.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// A numerical precondition failed (non-monotone profile, empty candidate
/// set, degenerate kernel and similar).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ermlab
