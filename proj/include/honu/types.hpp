#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace honu {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Gram or damped system that cannot be solved reliably.
class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(const std::string& what, double condition_estimate)
      : std::runtime_error(what), condition_estimate_(condition_estimate) {}

  /// Reciprocal of the factorization's rcond; +inf when exactly singular.
  double condition_estimate() const noexcept { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// A NaN or infinity showed up where a finite value is required.
class NumericAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The eigenvalue iteration did not converge; carries a usable upper bound.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double bound)
      : std::runtime_error(what), bound_(bound) {}

  double bound() const noexcept { return bound_; }

 private:
  double bound_;
};

namespace detail {

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

inline void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace detail
}  // namespace honu
