#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gmusic {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

// Bad input: inconsistent dimensions, out-of-range parameters, malformed
// configuration. The CLI maps these to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a spectrum is not separated and the caller asked for a
// result that only exists under separation.
class NotSeparatedError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Pole hits, failed brackets, non-converged iterations. Exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gmusic
