#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <variant>

#include "honu/types.hpp"

namespace honu {

/// Diagonal of the learning-rate matrix M, one strictly positive rate per
/// weight, ordered like colW.
class RateDiagonal {
 public:
  explicit RateDiagonal(Vector rates) : rates_(std::move(rates)) {
    for (Eigen::Index q = 0; q < rates_.size(); ++q)
      if (!(std::isfinite(rates_[q]) && rates_[q] > 0.0))
        throw std::invalid_argument("RateDiagonal: rate " + std::to_string(q) +
                                    " must be finite and > 0");
  }

  static RateDiagonal uniform(Eigen::Index size, double mu) {
    return RateDiagonal(Vector::Constant(size, mu));
  }

  Eigen::Index size() const noexcept { return rates_.size(); }
  const Vector& values() const noexcept { return rates_; }
  double operator[](Eigen::Index q) const { return rates_[q]; }

  void scale(double factor) {
    detail::require(std::isfinite(factor) && factor > 0.0, "RateDiagonal::scale: factor must be > 0");
    rates_ *= factor;
  }

 private:
  Vector rates_;
};

/// A single learning rate mu (>= 0) or a per-weight diagonal M.
using Rates = std::variant<double, RateDiagonal>;

inline void validate_rates(const Rates& rates, Eigen::Index n_w) {
  if (const auto* mu = std::get_if<double>(&rates)) {
    if (!(std::isfinite(*mu) && *mu >= 0.0))
      throw std::invalid_argument("learning rate mu must be finite and >= 0");
  } else if (std::get<RateDiagonal>(rates).size() != n_w) {
    throw std::invalid_argument("RateDiagonal length " +
                                std::to_string(std::get<RateDiagonal>(rates).size()) +
                                " does not match weight count " + std::to_string(n_w));
  }
}

inline double rate_at(const Rates& rates, Eigen::Index q) {
  if (const auto* mu = std::get_if<double>(&rates)) return *mu;
  return std::get<RateDiagonal>(rates)[q];
}

/// M * v.
inline Vector apply_rates(const Rates& rates, const Vector& v) {
  if (const auto* mu = std::get_if<double>(&rates)) return *mu * v;
  return std::get<RateDiagonal>(rates).values().cwiseProduct(v);
}

/// M * A, scaling row q of A by rate q.
inline Matrix apply_rates(const Rates& rates, const Matrix& a) {
  if (const auto* mu = std::get_if<double>(&rates)) return *mu * a;
  return std::get<RateDiagonal>(rates).values().asDiagonal() * a;
}

inline void scale_rates(Rates& rates, double factor) {
  if (auto* mu = std::get_if<double>(&rates))
    *mu *= factor;
  else
    std::get<RateDiagonal>(rates).scale(factor);
}

/// Diagonal of M as a vector of length n_w.
inline Vector rate_vector(const Rates& rates, Eigen::Index n_w) {
  if (const auto* mu = std::get_if<double>(&rates)) return Vector::Constant(n_w, *mu);
  return std::get<RateDiagonal>(rates).values();
}

/// Largest entry of M; the scalar itself for a single rate.
inline double max_rate(const Rates& rates) {
  if (const auto* mu = std::get_if<double>(&rates)) return *mu;
  return std::get<RateDiagonal>(rates).values().maxCoeff();
}

}  // namespace honu
