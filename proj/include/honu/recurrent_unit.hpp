#pragma once

// Recurrent HONU trained by real-time recurrent learning (RTRL).
//
// The input vector is x(k) = [1, fed-back outputs newest first, measured
// values newest first]. The unit predicts y(k + n_s) = rowx(k) colW(k).
// Because the fed-back taps depend on the weights, the expansion has a
// nonzero Jacobian J = d rowx / d colW, assembled each step from the
// sensitivity history D (one row d x_tau / d colW per input slot).

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>

#include "honu/polyops.hpp"
#include "honu/rates.hpp"
#include "honu/stability.hpp"
#include "honu/static_unit.hpp"
#include "honu/types.hpp"

namespace honu {

struct RecurrentConfig {
  std::size_t feedback_taps = 1;  // n_f
  std::size_t external_taps = 0;  // n_u
  std::size_t horizon = 1;        // n_s, samples ahead
  std::size_t order = 2;          // r
  /// Feed measured targets back instead of the unit's own outputs.
  bool teacher_forcing = false;

  std::size_t inputs() const noexcept { return feedback_taps + external_taps; }

  void validate() const {
    detail::require(feedback_taps >= 1, "RecurrentConfig: feedback_taps (n_f) must be >= 1");
    detail::require(horizon >= 1, "RecurrentConfig: horizon (n_s) must be >= 1");
    detail::require(order >= 1, "RecurrentConfig: order (r) must be >= 1");
  }
};

/// Everything one RTRL loop owns between steps.
///
/// Sensitivity rows: 0 is the bias, 1..n_f the feedback taps (newest first),
/// then the external taps. Only the feedback rows are ever nonzero.
struct RecurrentState {
  RecurrentConfig config;
  WeightVector weights;
  Vector feedback;  // newest first
  Vector external;  // newest first
  std::size_t feedback_filled = 0;
  std::size_t external_filled = 0;
  Matrix sensitivities;  // D, (n + 1) x n_w

  RecurrentState(const RecurrentConfig& cfg, WeightVector w)
      : config(cfg), weights(std::move(w)) {
    config.validate();
    if (weights.inputs() != config.inputs() || weights.order() != config.order)
      throw std::invalid_argument("RecurrentState: weights do not match the configuration");
    feedback = Vector::Zero(static_cast<Eigen::Index>(config.feedback_taps));
    external = Vector::Zero(static_cast<Eigen::Index>(config.external_taps));
    sensitivities = Matrix::Zero(static_cast<Eigen::Index>(config.inputs() + 1), weights.size());
  }

  explicit RecurrentState(const RecurrentConfig& cfg)
      : RecurrentState(cfg, WeightVector::zeros(make_basis(cfg.inputs(), cfg.order))) {}

  bool ready() const noexcept {
    return feedback_filled >= config.feedback_taps && external_filled >= config.external_taps;
  }

  /// Shifts a value into the feedback taps with a zero sensitivity row
  /// (used for priming and for teacher-forced values).
  void push_feedback(double v) { push_feedback(v, Vector::Zero(weights.size())); }

  /// Shifts an output and its sensitivity d y / d colW into the feedback taps.
  void push_feedback(double v, const Vector& sensitivity) {
    const auto n_f = static_cast<Eigen::Index>(config.feedback_taps);
    for (Eigen::Index i = n_f - 1; i > 0; --i) {
      feedback[i] = feedback[i - 1];
      sensitivities.row(i + 1) = sensitivities.row(i);
    }
    feedback[0] = v;
    sensitivities.row(1) = sensitivity.transpose();
    if (feedback_filled < config.feedback_taps) ++feedback_filled;
  }

  void push_external(double v) {
    const auto n_u = static_cast<Eigen::Index>(config.external_taps);
    if (n_u == 0) return;
    for (Eigen::Index i = n_u - 1; i > 0; --i) external[i] = external[i - 1];
    external[0] = v;
    if (external_filled < config.external_taps) ++external_filled;
  }

  /// Rows of D that can be nonzero.
  auto feedback_sensitivities() const {
    return sensitivities.middleRows(1, static_cast<Eigen::Index>(config.feedback_taps));
  }
};

/// D := 0. The next step then degenerates to a static gradient step.
inline void reset_jacobian(RecurrentState& state) { state.sensitivities.setZero(); }

/// x = [1, feedback newest first, external newest first].
inline AugmentedInput build_input(const RecurrentState& state) {
  if (!state.ready())
    throw std::logic_error("build_input: buffers not full (" +
                           std::to_string(state.feedback_filled) + "/" +
                           std::to_string(state.config.feedback_taps) + " feedback, " +
                           std::to_string(state.external_filled) + "/" +
                           std::to_string(state.config.external_taps) + " external)");
  Vector x(static_cast<Eigen::Index>(state.config.inputs() + 1));
  x[0] = 1.0;
  x.segment(1, state.feedback.size()) = state.feedback;
  x.segment(1 + state.feedback.size(), state.external.size()) = state.external;
  return AugmentedInput::from_augmented(std::move(x));
}

/// J = d rowx / d colW, entry (zeta, eta) = sum over the factor positions m
/// of monomial eta of D(index_m, zeta) times the product of the other
/// factors. Computed as D^T E with E = d colx / d x.
inline Matrix jacobian_assemble(const RecurrentState& state, const AugmentedInput& x) {
  const Matrix e = state.weights.basis->input_derivatives(x.values());
  return state.sensitivities.transpose() * e;
}

/// colW(k+1) = (I + M (R - S)) colW(k) + M colx y_p, the factored form of
/// the RTRL update. rtrl_step uses the equivalent direct form.
inline Vector factored_weight_update(const Vector& col_w, const Rates& rates, const Matrix& r,
                                     const Matrix& s, const Vector& colx, double target) {
  return update_matrix_recurrent(rates, r, s) * col_w + apply_rates(rates, Vector(colx * target));
}

enum class RadiusEvaluation {
  none,
  low_rank,  // exact, via the (n_f + 1)-dimensional core of M (R - S)
  dense,     // exact, full n_w x n_w eigenvalue problem
};

struct RtrlOptions {
  RadiusEvaluation radius = RadiusEvaluation::low_rank;
  bool frobenius = true;
};

struct RtrlStepReport {
  GdStepReport step;  // step.rho is NaN when the radius was not evaluated
  std::optional<double> rho_frobenius;
  /// d y / d colW = J colW + colx used for the update.
  Vector output_gradient;
};

/// One RTRL step; advances `state` in place.
///
/// 1. y = rowx colW, e = y_p(k + n_s) - y
/// 2. J from D, output gradient g = J colW + colx
/// 3. colW += M g e  (direct form of the factored update)
/// 4. g enters the feedback sensitivities (zero row under teacher forcing)
///    and y (or the target under teacher forcing) the feedback taps
/// 5. the next measurement, if the unit has external taps, is shifted in
///
/// The reported radius is rho(I + M (R - S)) for the weights before the
/// update.
inline RtrlStepReport rtrl_step(RecurrentState& state, double target,
                                std::optional<double> next_external, const Rates& rates,
                                const RtrlOptions& options = {}) {
  validate_rates(rates, state.weights.size());
  if (state.config.external_taps > 0 && !next_external)
    throw std::invalid_argument("rtrl_step: unit has external taps but no next measurement");
  if (!std::isfinite(target) || (next_external && !std::isfinite(*next_external)))
    throw NumericAbort("rtrl_step: non-finite target or measurement");

  const AugmentedInput x = build_input(state);
  const MonomialBasis& basis = *state.weights.basis;
  const Vector& w = state.weights.values;
  const Vector colx = basis.expand(x.values());
  const double y = colx.dot(w);
  const double e = target - y;

  const auto n_f = static_cast<Eigen::Index>(state.config.feedback_taps);
  const Matrix e_fb = basis.input_derivatives(x.values()).middleRows(1, n_f);
  const Matrix d_fb = state.feedback_sensitivities();
  const Matrix jacobian = d_fb.transpose() * e_fb;
  const Vector g = jacobian * w + colx;

  if (!std::isfinite(y) || !g.allFinite())
    throw NumericAbort("rtrl_step: non-finite output or gradient at weights norm " +
                       format_double(w.norm()));

  RtrlStepReport report{GdStepReport{WeightVector(state.weights.basis,
                                                  detail::apply_gradient(w, g, e, rates)),
                                     y, e, rates, std::nan("")},
                        std::nullopt, g};

  if (options.radius != RadiusEvaluation::none || options.frobenius) {
    // M (R - S) = M (y_p J - g rowx) = U V^T with
    // U = M [y_p D_fb^T, -g], V = [E_fb^T, colx].
    Matrix u(w.size(), n_f + 1);
    u.leftCols(n_f) = d_fb.transpose() * target;
    u.col(n_f) = -g;
    u = apply_rates(rates, u);
    Matrix v(w.size(), n_f + 1);
    v.leftCols(n_f) = e_fb.transpose();
    v.col(n_f) = colx;
    if (options.radius == RadiusEvaluation::low_rank) {
      report.step.rho = low_rank_radius(u, v);
    } else if (options.radius == RadiusEvaluation::dense) {
      const Matrix r = matrix_R(jacobian, w, colx, target);
      report.step.rho = spectral_radius(update_matrix_recurrent(rates, r, outer_S(colx)));
    }
    if (options.frobenius) report.rho_frobenius = low_rank_frobenius(u, v);
  }

  if (state.config.teacher_forcing)
    state.push_feedback(target);
  else
    state.push_feedback(y, g);
  if (next_external) state.push_external(*next_external);
  state.weights = report.step.weights;
  return report;
}

}  // namespace honu
