#pragma once

// Weight-update system matrices and their spectral radius.
//
// One gradient step on a HONU is an affine map colW(k+1) = A(k) colW(k) + b(k)
// with A = I - M S for a static unit and A = I + M (R - S) for a recurrent one.
// The step is stable when rho(A) <= 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include <Eigen/Eigenvalues>

#include "honu/format.hpp"
#include "honu/rates.hpp"
#include "honu/types.hpp"

namespace honu {

/// Classification tolerance: rho <= 1 + stable_tolerance counts as stable.
inline constexpr double stable_tolerance = 1e-9;

inline bool is_stable(double rho) { return rho <= 1.0 + stable_tolerance; }

/// S = colx * rowx.
inline Matrix outer_S(const Vector& colx) { return colx * colx.transpose(); }

/// R = J * y_p - (J * colW) * rowx.
inline Matrix matrix_R(const Matrix& jacobian, const Vector& col_w, const Vector& colx,
                       double target) {
  const Eigen::Index n_w = col_w.size();
  if (jacobian.rows() != n_w || jacobian.cols() != n_w || colx.size() != n_w)
    throw std::invalid_argument("matrix_R: J must be n_w x n_w and match colW/colx");
  return jacobian * target - (jacobian * col_w) * colx.transpose();
}

/// I - M S.
inline Matrix update_matrix_static(const Rates& rates, const Vector& colx) {
  validate_rates(rates, colx.size());
  return Matrix::Identity(colx.size(), colx.size()) - apply_rates(rates, outer_S(colx));
}

/// I + M (R - S).
inline Matrix update_matrix_recurrent(const Rates& rates, const Matrix& r, const Matrix& s) {
  validate_rates(rates, r.rows());
  return Matrix::Identity(r.rows(), r.cols()) + apply_rates(rates, Matrix(r - s));
}

/// Frobenius norm, an upper bound on the spectral radius.
template <typename Derived>
double frobenius_estimate(const Eigen::MatrixBase<Derived>& a) {
  return a.norm();
}

/// Maximum eigenvalue modulus of a general real square matrix.
///
/// Uses a real Schur decomposition (Hessenberg reduction + shifted QR), so
/// complex conjugate pairs are handled. Throws ConvergenceError carrying the
/// Frobenius bound if the QR iteration stalls.
inline double spectral_radius(const Matrix& a) {
  detail::require(a.rows() == a.cols(), "spectral_radius: matrix must be square");
  if (!a.allFinite()) throw NumericAbort("spectral_radius: non-finite matrix entry");
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw ConvergenceError("spectral_radius: eigenvalue iteration did not converge",
                           frobenius_estimate(a));
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

/// rho(I + U V^T) for tall U, V (n x k).
///
/// The nonzero spectrum of U V^T equals the spectrum of the k x k matrix
/// V^T U, so for k < n the result is max(1, max |1 + lambda(V^T U)|): the
/// remaining n - k eigenvalues are exactly 1.
inline double low_rank_radius(const Matrix& u, const Matrix& v) {
  detail::require(u.rows() == v.rows() && u.cols() == v.cols(),
                  "low_rank_radius: factor shapes differ");
  const Eigen::Index n = u.rows();
  const Eigen::Index k = u.cols();
  if (k >= n) {
    return spectral_radius(Matrix(Matrix::Identity(n, n) + u * v.transpose()));
  }
  const Matrix core = Matrix::Identity(k, k) + v.transpose() * u;
  return std::max(1.0, spectral_radius(core));
}

/// ||I + U V^T||_F without forming the n x n matrix.
inline double low_rank_frobenius(const Matrix& u, const Matrix& v) {
  const double n = static_cast<double>(u.rows());
  const double sq = n + 2.0 * (v.transpose() * u).trace() +
                    ((u.transpose() * u) * (v.transpose() * v)).trace();
  return std::sqrt(std::max(0.0, sq));
}

/// rho(I - M S) from the rank-1 structure of M S:
/// max(1, |1 - rowx M colx|) (needs n_w >= 2, which every basis has).
inline double static_radius_closed_form(const Rates& rates, const Vector& colx) {
  validate_rates(rates, colx.size());
  const double gain = colx.dot(apply_rates(rates, colx));
  const double moving = std::abs(1.0 - gain);
  return colx.size() >= 2 ? std::max(1.0, moving) : moving;
}

enum class StabilityMode { static_unit, recurrent_unit };

inline std::string_view to_string(StabilityMode m) {
  return m == StabilityMode::static_unit ? "static" : "recurrent";
}

/// Actions form a bit set; a trigger usually both backs off and resets.
enum class GuardAction : unsigned { none = 0, rate_backoff = 1, jacobian_reset = 2 };

inline GuardAction operator|(GuardAction a, GuardAction b) {
  return static_cast<GuardAction>(static_cast<unsigned>(a) | static_cast<unsigned>(b));
}

inline bool has_action(GuardAction set, GuardAction a) {
  return (static_cast<unsigned>(set) & static_cast<unsigned>(a)) != 0;
}

inline std::string to_string(GuardAction a) {
  if (a == GuardAction::none) return "none";
  std::string out;
  if (has_action(a, GuardAction::rate_backoff)) out = "rate-backoff";
  if (has_action(a, GuardAction::jacobian_reset)) {
    if (!out.empty()) out += '+';
    out += "jacobian-reset";
  }
  return out;
}

struct StabilityRecord {
  std::size_t step = 0;
  std::optional<double> rho_exact;
  std::optional<double> rho_frobenius;
  StabilityMode mode = StabilityMode::static_unit;
  GuardAction action = GuardAction::none;
};

inline constexpr std::string_view stability_csv_header = "k,rho_exact,rho_frobenius,mode,action";

inline void write_stability_row(std::ostream& os, const StabilityRecord& rec) {
  os << rec.step << ',' << format_optional(rec.rho_exact) << ','
     << format_optional(rec.rho_frobenius) << ',' << to_string(rec.mode) << ','
     << to_string(rec.action) << '\n';
}

struct GuardPolicy {
  double threshold = 1.05;
  double backoff = 0.6;
  bool reset_jacobian = true;

  void validate() const {
    detail::require(threshold >= 1.0, "GuardPolicy: threshold must be >= 1");
    detail::require(backoff > 0.0 && backoff < 1.0, "GuardPolicy: backoff must lie in (0, 1)");
  }
};

/// Anything whose sensitivity history can be cleared, e.g. RecurrentState.
template <typename State>
concept JacobianResettable = requires(State& s) { reset_jacobian(s); };

/// Applies the policy to the current step's record.
///
/// Triggers only on the exact radius; steps without an exact radius (skipped
/// by the monitoring cadence) are left alone. On trigger every rate is
/// multiplied by the backoff factor and, if the policy says so and a state
/// is given, the Jacobian history is reset. The action is written into the
/// record and returned.
template <typename State>
GuardAction guard(StabilityRecord& record, const GuardPolicy& policy, Rates& rates,
                  State* state) {
  policy.validate();
  GuardAction action = GuardAction::none;
  if (record.rho_exact && *record.rho_exact > policy.threshold) {
    scale_rates(rates, policy.backoff);
    action = GuardAction::rate_backoff;
    if constexpr (JacobianResettable<State>) {
      if (policy.reset_jacobian && state != nullptr) {
        reset_jacobian(*state);
        action = action | GuardAction::jacobian_reset;
      }
    }
  }
  record.action = action;
  return action;
}

/// Static units have no Jacobian to reset.
inline GuardAction guard(StabilityRecord& record, const GuardPolicy& policy, Rates& rates) {
  return guard<std::nullptr_t>(record, policy, rates, nullptr);
}

}  // namespace honu
