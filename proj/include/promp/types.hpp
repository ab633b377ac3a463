#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace promp {

/// Flat policy parameter vector. Every gradient and Hessian in the library is
/// expressed against its indexing.
using ParamVector = Eigen::VectorXd;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class of all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition was violated (negative step size, empty batch,
/// off-policy batch fed to an on-policy estimator, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Enumeration would exceed the configured trajectory cap.
class EnumerationSizeError : public Error {
 public:
  using Error::Error;
};

/// Training diverged (parameter blow-up or non-finite return).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Eigen::Ref<const Matrix>& m) {
  return m.allFinite();
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline void require(bool cond, const std::string& what) {
  if (!cond) throw PreconditionError(what);
}

}  // namespace promp
