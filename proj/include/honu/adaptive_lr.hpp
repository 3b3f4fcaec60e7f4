#pragma once

// Adaptive learning rates for HONUs. Since a HONU is linear in its weights,
// the NLMS family and the gradient-adaptive step-size rules of linear
// adaptive filters carry over with colx in place of the filter regressor.
// The regressor delay is fixed to the current sample.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "honu/rates.hpp"
#include "honu/stability.hpp"
#include "honu/types.hpp"

namespace honu {

namespace detail {

inline Rates divide_rates(const Rates& base, double denom) {
  if (const auto* mu = std::get_if<double>(&base)) return *mu / denom;
  return RateDiagonal(std::get<RateDiagonal>(base).values() / denom);
}

}  // namespace detail

enum class NormalizedVariant { norm, squared_norm, frobenius, row_norm, row_squared_norm };
enum class GradientVariant { benveniste, farhang_ang, mathews };
enum class RegularizerVariant { gngd, rr_nlms };

/// Rates normalized by the expansion or by A = I - M S.
///
///   norm              mu / (||rowx|| + eps)
///   squared_norm      mu / (rowx colx + eps)
///   frobenius         mu / (||A||_F^2 + eps)
///   row_norm          mu_q / (||A_q,:|| + eps)
///   row_squared_norm  mu_q / (A_q,: A_q,:^T + eps)
///
/// A is built from `base` (a scalar mu or the diagonal of mu_q). The row
/// variants return a RateDiagonal; the others keep the shape of `base`. The rows of A are
/// evaluated in closed form: ||A_q||^2 = 1 - 2 m_q x_q^2 + m_q^2 x_q^2 ||x||^2.
inline Rates normalized_rate(NormalizedVariant variant, const Vector& colx, const Rates& base,
                             double epsilon) {
  validate_rates(base, colx.size());
  detail::require(std::isfinite(epsilon) && epsilon >= 0.0, "normalized_rate: eps must be >= 0");
  const double sq = colx.squaredNorm();
  switch (variant) {
    case NormalizedVariant::norm:
      return detail::divide_rates(base, std::sqrt(sq) + epsilon);
    case NormalizedVariant::squared_norm:
      return detail::divide_rates(base, sq + epsilon);
    default:
      break;
  }
  const Eigen::ArrayXd m = rate_vector(base, colx.size()).array();
  const Eigen::ArrayXd x2 = colx.array().square();
  const Eigen::ArrayXd row_sq = (1.0 - 2.0 * m * x2 + m.square() * x2 * sq).max(0.0);
  if (variant == NormalizedVariant::frobenius)
    return detail::divide_rates(base, row_sq.sum() + epsilon);
  if (max_rate(base) == 0.0) return 0.0;
  if (variant == NormalizedVariant::row_norm)
    return RateDiagonal((m / (row_sq.sqrt() + epsilon)).matrix());
  return RateDiagonal((m / (row_sq + epsilon)).matrix());
}

/// Matrix variants evaluated on an explicit A (any square matrix).
inline Rates normalized_rate(NormalizedVariant variant, const Matrix& a, const Rates& base,
                             double epsilon) {
  detail::require(a.rows() == a.cols(), "normalized_rate: A must be square");
  validate_rates(base, a.rows());
  const Eigen::ArrayXd m = rate_vector(base, a.rows()).array();
  const Eigen::ArrayXd row_sq = a.rowwise().squaredNorm().array();
  switch (variant) {
    case NormalizedVariant::frobenius:
      return detail::divide_rates(base, a.squaredNorm() + epsilon);
    case NormalizedVariant::row_norm:
      if (max_rate(base) == 0.0) return 0.0;
      return RateDiagonal((m / (row_sq.sqrt() + epsilon)).matrix());
    case NormalizedVariant::row_squared_norm:
      if (max_rate(base) == 0.0) return 0.0;
      return RateDiagonal((m / (row_sq + epsilon)).matrix());
    default:
      throw std::invalid_argument("normalized_rate: norm variants need rowx, not A");
  }
}

/// Mathews: mu + beta e(k) e(k-1) colx(k)^T colx(k-1).
inline double mathews_rate(double mu, double beta, double error, double prev_error,
                           const Vector& colx, const Vector& prev_colx) {
  return mu + beta * error * prev_error * colx.dot(prev_colx);
}

/// GNGD: eps - beta mu e(k) e(k-1) colx^T colx_prev / (||colx_prev||^2 + eps)^2.
inline double gngd_epsilon(double epsilon, double beta, double mu, double error,
                           double prev_error, const Vector& colx, const Vector& prev_colx) {
  const double denom = prev_colx.squaredNorm() + epsilon;
  return epsilon - beta * mu * error * prev_error * colx.dot(prev_colx) / (denom * denom);
}

/// RR-NLMS: max(eps_min, eps - beta sign(e(k) e(k-1) colx^T colx_prev)).
inline double rr_nlms_epsilon(double epsilon, double epsilon_min, double beta, double error,
                              double prev_error, const Vector& colx, const Vector& prev_colx) {
  const double arg = error * prev_error * colx.dot(prev_colx);
  const double sign = static_cast<double>((arg > 0.0) - (arg < 0.0));
  return std::max(epsilon_min, epsilon - beta * sign);
}

/// Histories and constants of one adaptive-rate loop.
struct LrState {
  double mu = 0.01;           // current rate mu(k)
  double epsilon = 1.0;       // regularizer eps(k)
  double epsilon_min = 1e-4;  // RR-NLMS floor
  double beta = 1e-3;
  double forgetting = 0.9;    // Farhang-Ang eta, in (0, 1)
  Vector gamma;               // gradient memory, empty until first use
  std::optional<Vector> prev_colx;
  std::optional<double> prev_error;
  double prev_mu = 0.0;       // mu(k-1)

  void remember(double error, const Vector& colx, double used_mu) {
    prev_colx = colx;
    prev_error = error;
    prev_mu = used_mu;
  }
};

/// mu(k+1) = mu(k) + beta e(k) gamma(k)^T colx(k), with gamma from
///   benveniste   gamma(k) = (I - mu(k-1) colx(k-1) colx(k-1)^T) gamma(k-1) + e(k-1) colx(k-1)
///   farhang_ang  gamma(k) = eta gamma(k-1) + e(k-1) colx(k-1)
///   mathews      gamma = 1 (see mathews_rate)
/// gamma(0) = 0, so the first call leaves mu unchanged. mu never drops below 0.
/// Records (e(k), colx(k), mu(k)) as the new one-step history.
inline void gradient_adaptive_rate(GradientVariant variant, LrState& st, double error,
                                   const Vector& colx) {
  detail::require(st.beta > 0.0, "gradient_adaptive_rate: beta must be > 0");
  const double mu_k = st.mu;
  if (variant == GradientVariant::mathews) {
    if (st.prev_error)
      st.mu = mathews_rate(st.mu, st.beta, error, *st.prev_error, colx, *st.prev_colx);
  } else {
    if (variant == GradientVariant::farhang_ang)
      detail::require(st.forgetting > 0.0 && st.forgetting < 1.0,
                      "gradient_adaptive_rate: Farhang-Ang forgetting must lie in (0, 1)");
    if (st.gamma.size() != colx.size()) st.gamma = Vector::Zero(colx.size());
    if (st.prev_error) {
      const Vector& xp = *st.prev_colx;
      if (variant == GradientVariant::benveniste)
        st.gamma = st.gamma - st.prev_mu * xp * xp.dot(st.gamma) + *st.prev_error * xp;
      else
        st.gamma = st.forgetting * st.gamma + *st.prev_error * xp;
    }
    st.mu = st.mu + st.beta * error * st.gamma.dot(colx);
  }
  st.mu = std::max(0.0, st.mu);
  st.remember(error, colx, mu_k);
}

/// eps(k+1) from the one-step history; a no-op until a history exists.
/// GNGD's eps is kept >= 0, RR-NLMS's >= eps_min. Records the new history.
inline void regularizer_update(RegularizerVariant variant, LrState& st, double error,
                               const Vector& colx) {
  detail::require(st.beta > 0.0, "regularizer_update: beta must be > 0");
  if (st.prev_error) {
    if (variant == RegularizerVariant::gngd)
      st.epsilon = std::max(0.0, gngd_epsilon(st.epsilon, st.beta, st.mu, error, *st.prev_error,
                                              colx, *st.prev_colx));
    else
      st.epsilon = rr_nlms_epsilon(st.epsilon, st.epsilon_min, st.beta, error, *st.prev_error,
                                   colx, *st.prev_colx);
  }
  st.remember(error, colx, st.mu);
}

/// Named learning-rate schemes selectable from configuration.
enum class SchemeKind {
  fixed,
  norm,
  squared_norm,
  frobenius,
  row_norm,
  row_squared_norm,
  gngd,
  rr_nlms,
  benveniste,
  farhang_ang,
  mathews,
};

inline constexpr std::pair<SchemeKind, std::string_view> scheme_names[] = {
    {SchemeKind::fixed, "fixed"},
    {SchemeKind::norm, "norm"},
    {SchemeKind::squared_norm, "squared-norm"},
    {SchemeKind::frobenius, "frobenius"},
    {SchemeKind::row_norm, "row-norm"},
    {SchemeKind::row_squared_norm, "row-squared-norm"},
    {SchemeKind::gngd, "gngd"},
    {SchemeKind::rr_nlms, "rr-nlms"},
    {SchemeKind::benveniste, "benveniste"},
    {SchemeKind::farhang_ang, "farhang-ang"},
    {SchemeKind::mathews, "mathews"},
};

inline std::string_view to_string(SchemeKind k) {
  for (const auto& [kind, name] : scheme_names)
    if (kind == k) return name;
  return "?";
}

inline std::optional<SchemeKind> parse_scheme(std::string_view s) {
  for (const auto& [kind, name] : scheme_names)
    if (name == s) return kind;
  return std::nullopt;
}

/// Produces the rates for each step and consumes the step's outcome.
class LearningRateScheme {
 public:
  LearningRateScheme(SchemeKind kind, LrState state) : kind_(kind), state_(std::move(state)) {
    detail::require(std::isfinite(state_.mu) && state_.mu >= 0.0, "scheme: mu must be >= 0");
    detail::require(state_.epsilon >= 0.0, "scheme: epsilon must be >= 0");
  }

  static LearningRateScheme fixed(double mu) {
    LrState st;
    st.mu = mu;
    return LearningRateScheme(SchemeKind::fixed, st);
  }

  SchemeKind kind() const noexcept { return kind_; }
  const LrState& state() const noexcept { return state_; }

  /// Rates for the step whose expansion is colx.
  Rates rates_for(const Vector& colx) const {
    switch (kind_) {
      case SchemeKind::fixed:
      case SchemeKind::benveniste:
      case SchemeKind::farhang_ang:
      case SchemeKind::mathews:
        return state_.mu;
      case SchemeKind::norm:
        return normalized_rate(NormalizedVariant::norm, colx, state_.mu, state_.epsilon);
      case SchemeKind::squared_norm:
      case SchemeKind::gngd:
      case SchemeKind::rr_nlms:
        return normalized_rate(NormalizedVariant::squared_norm, colx, state_.mu, state_.epsilon);
      case SchemeKind::frobenius:
        return normalized_rate(NormalizedVariant::frobenius, colx, state_.mu, state_.epsilon);
      case SchemeKind::row_norm:
        return normalized_rate(NormalizedVariant::row_norm, colx, state_.mu, state_.epsilon);
      case SchemeKind::row_squared_norm:
        return normalized_rate(NormalizedVariant::row_squared_norm, colx, state_.mu,
                               state_.epsilon);
    }
    throw std::logic_error("LearningRateScheme: unknown kind");
  }

  void observe(double error, const Vector& colx) {
    switch (kind_) {
      case SchemeKind::gngd:
        regularizer_update(RegularizerVariant::gngd, state_, error, colx);
        break;
      case SchemeKind::rr_nlms:
        regularizer_update(RegularizerVariant::rr_nlms, state_, error, colx);
        break;
      case SchemeKind::benveniste:
        gradient_adaptive_rate(GradientVariant::benveniste, state_, error, colx);
        break;
      case SchemeKind::farhang_ang:
        gradient_adaptive_rate(GradientVariant::farhang_ang, state_, error, colx);
        break;
      case SchemeKind::mathews:
        gradient_adaptive_rate(GradientVariant::mathews, state_, error, colx);
        break;
      default:
        break;
    }
  }

  /// Multiplies the base rate, e.g. on a stability guard trigger.
  void scale_base(double factor) { state_.mu *= factor; }

 private:
  SchemeKind kind_;
  LrState state_;
};

}  // namespace honu
