#pragma once

// Static HONU: y = rowx * colW. Linear in the weights, so the squared-error
// fit has a unique minimum reachable directly (least squares), by damped
// Gauss-Newton steps, or by per-sample gradient descent.

#include <cfloat>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>

#include "honu/polyops.hpp"
#include "honu/rates.hpp"
#include "honu/stability.hpp"
#include "honu/types.hpp"

namespace honu {

/// Flattened weights colW, aligned with the basis order.
struct WeightVector {
  BasisPtr basis;
  Vector values;

  WeightVector(BasisPtr b, Vector v) : basis(std::move(b)), values(std::move(v)) {
    detail::require(basis != nullptr, "WeightVector: null basis");
    if (values.size() != static_cast<Eigen::Index>(basis->size()))
      throw std::invalid_argument("WeightVector: " + std::to_string(values.size()) +
                                  " values for a basis of " + std::to_string(basis->size()));
  }

  static WeightVector zeros(BasisPtr b) {
    const auto n_w = static_cast<Eigen::Index>(b->size());
    return WeightVector(std::move(b), Vector::Zero(n_w));
  }

  /// Uniform in [-scale, scale], reproducible from the seed.
  static WeightVector random(BasisPtr b, std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    Vector v(static_cast<Eigen::Index>(b->size()));
    for (Eigen::Index q = 0; q < v.size(); ++q) v[q] = dist(rng);
    return WeightVector(std::move(b), std::move(v));
  }

  std::size_t inputs() const noexcept { return basis->inputs(); }
  std::size_t order() const noexcept { return basis->order(); }
  Eigen::Index size() const noexcept { return values.size(); }
};

/// N augmented patterns (rows, bias in column 0) and their targets.
class TrainingSet {
 public:
  TrainingSet(Matrix patterns, Vector targets)
      : patterns_(std::move(patterns)), targets_(std::move(targets)) {
    if (patterns_.rows() != targets_.size())
      throw std::invalid_argument("TrainingSet: " + std::to_string(patterns_.rows()) +
                                  " patterns but " + std::to_string(targets_.size()) +
                                  " targets");
    detail::require(patterns_.cols() >= 2, "TrainingSet: patterns need bias plus inputs");
    for (Eigen::Index k = 0; k < patterns_.rows(); ++k)
      if (patterns_(k, 0) != 1.0)
        throw std::invalid_argument("TrainingSet: pattern " + std::to_string(k) +
                                    " has bias != 1");
  }

  Eigen::Index size() const noexcept { return targets_.size(); }
  std::size_t inputs() const noexcept { return static_cast<std::size_t>(patterns_.cols() - 1); }
  const Matrix& patterns() const noexcept { return patterns_; }
  const Vector& targets() const noexcept { return targets_; }

  AugmentedInput pattern(Eigen::Index k) const {
    return AugmentedInput::from_augmented(patterns_.row(k).transpose());
  }

  /// Rows [first, first + count).
  TrainingSet slice(Eigen::Index first, Eigen::Index count) const {
    return TrainingSet(patterns_.middleRows(first, count), targets_.segment(first, count));
  }

 private:
  Matrix patterns_;
  Vector targets_;
};

struct GdStepReport {
  WeightVector weights;
  double prediction = 0.0;
  double error = 0.0;  // target - prediction
  Rates rates;
  double rho = 1.0;
};

namespace detail {

inline void check_dims(const WeightVector& w, std::size_t inputs) {
  if (w.inputs() != inputs)
    throw std::invalid_argument("weights expect " + std::to_string(w.inputs()) +
                                " inputs, got " + std::to_string(inputs));
}

/// w + M * (e * g), evaluated per entry as w_q + m_q * (e * g_q). Every
/// trainer funnels its update through here so equivalent steps stay
/// bit-identical.
inline Vector apply_gradient(const Vector& w, const Vector& g, double error, const Rates& rates) {
  Vector out(w.size());
  if (const auto* mu = std::get_if<double>(&rates)) {
    for (Eigen::Index q = 0; q < w.size(); ++q) out[q] = w[q] + *mu * (error * g[q]);
  } else {
    const Vector& m = std::get<RateDiagonal>(rates).values();
    for (Eigen::Index q = 0; q < w.size(); ++q) out[q] = w[q] + m[q] * (error * g[q]);
  }
  return out;
}

struct GramSolution {
  Vector w;
  double condition = 1.0;  // 1 / rcond of the factorization
};

/// Solves G w = b by LDLT with two refinement sweeps.
inline GramSolution solve_gram(const Matrix& gram, const Vector& b, const char* who) {
  Eigen::LDLT<Matrix> ldlt(gram);
  // LDLT pseudo-inverts zero pivots, so rcond alone misses exact rank
  // deficiency; the pivot spread catches it.
  const Vector pivots = ldlt.vectorD().cwiseAbs();
  const double spread = pivots.size() == 0    ? 1.0
                        : pivots.minCoeff() > 0 ? pivots.maxCoeff() / pivots.minCoeff()
                                                : HUGE_VAL;
  const double rcond =
      ldlt.info() == Eigen::Success && ldlt.isPositive() ? std::min(ldlt.rcond(), 1.0 / spread) : 0.0;
  const double cond = rcond > 0.0 ? 1.0 / rcond : HUGE_VAL;
  if (!(rcond > static_cast<double>(gram.rows()) * DBL_EPSILON))
    throw SingularSystemError(std::string(who) +
                                  ": Gram matrix is singular or ill-conditioned (condition "
                                  "estimate " + format_double(cond) +
                                  "); add a ridge term",
                              cond);
  Vector w = ldlt.solve(b);
  for (int sweep = 0; sweep < 2; ++sweep) w += ldlt.solve(Vector(b - gram * w));
  if (!w.allFinite())
    throw SingularSystemError(std::string(who) + ": solution is not finite", cond);
  return GramSolution{std::move(w), cond};
}

}  // namespace detail

/// y = rowx * colW.
inline double forward(const WeightVector& w, const AugmentedInput& x) {
  detail::check_dims(w, x.inputs());
  return w.basis->expand(x.values()).dot(w.values);
}

inline Vector forward_batch(const WeightVector& w, const Matrix& patterns) {
  detail::check_dims(w, static_cast<std::size_t>(std::max<Eigen::Index>(patterns.cols(), 1) - 1));
  Vector y(patterns.rows());
  for (Eigen::Index k = 0; k < patterns.rows(); ++k)
    y[k] = w.basis->expand(patterns.row(k).transpose()).dot(w.values);
  return y;
}

/// One gradient-descent step colW + M (y_p - rowx colW) colx, with the
/// stability radius of I - M S for the rates used.
inline GdStepReport gd_step(const WeightVector& w, const AugmentedInput& x, double target,
                            const Rates& rates) {
  detail::check_dims(w, x.inputs());
  validate_rates(rates, w.size());
  if (!std::isfinite(target) || !x.values().allFinite() || !w.values.allFinite())
    throw NumericAbort("gd_step: non-finite weights, input or target");
  const Vector colx = w.basis->expand(x.values());
  const double y = colx.dot(w.values);
  const double e = target - y;
  return GdStepReport{WeightVector(w.basis, detail::apply_gradient(w.values, colx, e, rates)), y,
                      e, rates, static_radius_closed_form(rates, colx)};
}

/// Relative stationarity residual max|b - G w| / ||b|| of the (ridge)
/// normal equations G w = b, G = colX rowX + ridge I, b = colX y_p.
inline double stationarity_residual(const WeightVector& w, const TrainingSet& train,
                                    double ridge = 0.0) {
  const Matrix x = w.basis->expand_batch(train.patterns());
  const Vector b = x.transpose() * train.targets();
  const Vector grad = b - x.transpose() * (x * w.values) - ridge * w.values;
  const double scale = b.norm();
  return scale > 0.0 ? grad.cwiseAbs().maxCoeff() / scale : grad.cwiseAbs().maxCoeff();
}

/// Tolerance on stationarity_residual accepted from lsm_fit.
inline constexpr double lsm_tolerance = 1e-8;

/// Least-squares weights colW = (colX rowX + ridge I)^-1 colX y_p.
inline WeightVector lsm_fit(const TrainingSet& train, std::size_t r, double ridge = 0.0) {
  detail::require(std::isfinite(ridge) && ridge >= 0.0, "lsm_fit: ridge must be >= 0");
  auto basis = make_basis(train.inputs(), r);
  const Matrix x = basis->expand_batch(train.patterns());
  Matrix gram = x.transpose() * x;
  gram.diagonal().array() += ridge;
  const Vector b = x.transpose() * train.targets();
  auto solved = detail::solve_gram(gram, b, "lsm_fit");
  WeightVector w(basis, std::move(solved.w));
  const double resid = stationarity_residual(w, train, ridge);
  if (!(resid <= lsm_tolerance))
    throw SingularSystemError("lsm_fit: normal equations not satisfied (relative residual " +
                                  format_double(resid) + "); add a ridge term",
                              solved.condition);
  return w;
}

struct LmStep {
  Vector increment;
  WeightVector weights;
};

/// Levenberg-Marquardt step dW = (colX rowX + I / mu)^-1 colX e.
inline LmStep lm_step(const WeightVector& w, const TrainingSet& train, double mu) {
  detail::require(std::isfinite(mu) && mu > 0.0, "lm_step: mu must be finite and > 0");
  detail::check_dims(w, train.inputs());
  const Matrix x = w.basis->expand_batch(train.patterns());
  const Vector e = train.targets() - x * w.values;
  Matrix damped = x.transpose() * x;
  damped.diagonal().array() += 1.0 / mu;
  Vector dw = detail::solve_gram(damped, x.transpose() * e, "lm_step").w;
  WeightVector next(w.basis, w.values + dw);
  return LmStep{std::move(dw), std::move(next)};
}

}  // namespace honu
