#pragma once

// Epoch loops for gradient-descent training of static and recurrent units,
// with per-step stability monitoring and the optional guard.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "honu/adaptive_lr.hpp"
#include "honu/io.hpp"
#include "honu/recurrent_unit.hpp"
#include "honu/stability.hpp"
#include "honu/static_unit.hpp"

namespace honu {

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double sse = 0.0;
  double mae = 0.0;
};

struct MonitorOptions {
  /// Radii are evaluated on steps k with k % every == 0; 0 disables them.
  std::size_t every = 1;
  RadiusEvaluation radius = RadiusEvaluation::low_rank;  // recurrent units only
  bool frobenius = true;
  std::optional<GuardPolicy> guard;
};

enum class RunStatus { ok, numeric_abort };

inline std::string_view to_string(RunStatus s) {
  return s == RunStatus::ok ? "ok" : "numeric-abort";
}

struct TrainResult {
  WeightVector weights;
  std::vector<TraceRow> trace;
  std::vector<EpochStats> epochs;
  RunStatus status = RunStatus::ok;
  std::string abort_reason;
  std::optional<StabilityRecord> last_record;
  std::size_t guard_triggers = 0;

  explicit TrainResult(WeightVector w) : weights(std::move(w)) {}
};

namespace detail {

inline double mean_rate(const Rates& rates) {
  if (const auto* mu = std::get_if<double>(&rates)) return *mu;
  return std::get<RateDiagonal>(rates).values().mean();
}

inline bool monitored(const MonitorOptions& m, std::size_t k) {
  return m.every != 0 && k % m.every == 0;
}

/// ||I - M S||_F from the rank-1 structure:
/// n_w - 2 sum m_q x_q^2 + sum m_q^2 x_q^2 ||x||^2.
inline double static_frobenius(const Rates& rates, const Vector& colx) {
  const Eigen::ArrayXd m = rate_vector(rates, colx.size()).array();
  const Eigen::ArrayXd x2 = colx.array().square();
  const double sq = static_cast<double>(colx.size()) - 2.0 * (m * x2).sum() +
                    (m.square() * x2).sum() * colx.squaredNorm();
  return std::sqrt(std::max(0.0, sq));
}

inline void close_epoch(TrainResult& out, std::size_t epoch, double sse, double abs_sum,
                        std::size_t steps) {
  const double denom = steps ? static_cast<double>(steps) : 1.0;
  out.epochs.push_back(EpochStats{epoch, sse, abs_sum / denom});
}

}  // namespace detail

/// Sample-by-sample gradient descent in time order, `epochs` passes.
///
/// A non-finite weight, output or rate stops the run with status
/// numeric_abort; the epoch in progress is then reported with SSE = inf.
inline TrainResult train_static_gd(WeightVector w, const TrainingSet& train,
                                   LearningRateScheme scheme, std::size_t epochs,
                                   const MonitorOptions& monitor = {}) {
  detail::check_dims(w, train.inputs());
  TrainResult out(std::move(w));
  std::size_t k = 0;
  for (std::size_t ep = 1; ep <= epochs; ++ep) {
    double sse = 0.0, abs_sum = 0.0;
    for (Eigen::Index i = 0; i < train.size(); ++i, ++k) {
      const AugmentedInput x = train.pattern(i);
      const double target = train.targets()[i];
      try {
        const Vector colx = out.weights.basis->expand(x.values());
        Rates rates = scheme.rates_for(colx);
        GdStepReport rep = gd_step(out.weights, x, target, rates);
        if (!rep.weights.values.allFinite() || !std::isfinite(rep.error))
          throw NumericAbort("gd_step produced non-finite weights at step " + std::to_string(k));
        StabilityRecord rec{k, std::nullopt, std::nullopt, StabilityMode::static_unit,
                            GuardAction::none};
        if (detail::monitored(monitor, k)) {
          rec.rho_exact = rep.rho;
          if (monitor.frobenius) rec.rho_frobenius = detail::static_frobenius(rates, colx);
        }
        out.weights = std::move(rep.weights);
        if (monitor.guard) {
          Rates probe = scheme.state().mu;
          if (guard(rec, *monitor.guard, probe) != GuardAction::none) {
            scheme.scale_base(monitor.guard->backoff);
            ++out.guard_triggers;
          }
        }
        scheme.observe(rep.error, colx);
        sse += rep.error * rep.error;
        abs_sum += std::abs(rep.error);
        out.trace.push_back(
            TraceRow{k, ep, rep.prediction, target, rep.error, detail::mean_rate(rates), rec});
        out.last_record = rec;
      } catch (const NumericAbort& ex) {
        out.status = RunStatus::numeric_abort;
        out.abort_reason = ex.what();
        out.epochs.push_back(EpochStats{ep, HUGE_VAL, HUGE_VAL});
        return out;
      }
    }
    detail::close_epoch(out, ep, sse, abs_sum, static_cast<std::size_t>(train.size()));
  }
  return out;
}

/// A signal to predict and, for units with external taps, the measured
/// input series aligned with it (same length).
struct SequenceData {
  std::vector<double> target;
  std::vector<double> external;
};

/// Index layout of a recurrent pass over samples [0, end):
///   first step k0 = max(n_f, n_u) - 1, last step k with k + n_s < end;
///   before k0 the external taps hold u(k0 - n_u + 1 .. k0) and the
///   feedback taps s(k0 - n_f + n_s .. k0 - 1 + n_s), i.e. the values the
///   unit would have produced with a perfect history.
struct SequenceLayout {
  std::size_t first = 0;
  std::size_t end = 0;  // one past the last sample the pass may read

  std::size_t steps(std::size_t horizon) const {
    return end > first + horizon ? end - first - horizon : 0;
  }
};

inline SequenceLayout sequence_layout(const RecurrentConfig& cfg, std::size_t end) {
  return SequenceLayout{std::max(cfg.feedback_taps, cfg.external_taps) - 1, end};
}

/// Clears buffers and D and primes the taps for a pass starting at k0.
inline void prime_state(RecurrentState& st, const SequenceData& data, std::size_t k0) {
  const RecurrentConfig& c = st.config;
  st.feedback.setZero();
  st.external.setZero();
  st.feedback_filled = st.external_filled = 0;
  reset_jacobian(st);
  for (std::size_t i = 0; i < c.feedback_taps; ++i)
    st.push_feedback(data.target[k0 + 1 + i + c.horizon - c.feedback_taps - 1]);
  for (std::size_t i = 0; i < c.external_taps; ++i)
    st.push_external(data.external[k0 + 1 + i - c.external_taps]);
}

struct RecurrentRun {
  TrainResult result;
  std::vector<double> test_predictions;  // frozen-weight pass over the test window
  std::vector<double> test_targets;
};

/// RTRL training over samples [0, train_end) for `epochs` passes. Every
/// epoch re-primes the buffers and clears D; weights and rates carry over.
/// After training the weights are frozen and the unit keeps running to the
/// end of the data; predictions whose targets lie in [train_end, end) are
/// returned for testing.
inline RecurrentRun train_rtrl(RecurrentState state, const SequenceData& data,
                               std::size_t train_end, LearningRateScheme scheme,
                               std::size_t epochs, const MonitorOptions& monitor = {}) {
  const RecurrentConfig cfg = state.config;
  detail::require(cfg.external_taps == 0 || data.external.size() == data.target.size(),
                  "train_rtrl: external series must match the target length");
  detail::require(train_end <= data.target.size(), "train_rtrl: train_end beyond the data");
  const SequenceLayout layout = sequence_layout(cfg, train_end);
  detail::require(layout.steps(cfg.horizon) > 0, "train_rtrl: training window too short");

  RecurrentRun run{TrainResult(state.weights), {}, {}};
  TrainResult& out = run.result;
  RtrlOptions opts{monitor.radius, monitor.frobenius};
  std::size_t k_global = 0;

  auto next_ext = [&](std::size_t k) -> std::optional<double> {
    if (cfg.external_taps == 0) return std::nullopt;
    return k + 1 < data.external.size() ? data.external[k + 1] : 0.0;
  };

  for (std::size_t ep = 1; ep <= epochs; ++ep) {
    prime_state(state, data, layout.first);
    double sse = 0.0, abs_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t k = layout.first; k + cfg.horizon < train_end; ++k, ++k_global, ++steps) {
      const double target = data.target[k + cfg.horizon];
      try {
        const Vector colx = state.weights.basis->expand(build_input(state).values());
        Rates rates = scheme.rates_for(colx);
        const bool mon = detail::monitored(monitor, k_global);
        RtrlOptions step_opts = mon ? opts : RtrlOptions{RadiusEvaluation::none, false};
        RtrlStepReport rep = rtrl_step(state, target, next_ext(k), rates, step_opts);
        if (!state.weights.values.allFinite() || !std::isfinite(rep.step.error))
          throw NumericAbort("rtrl_step produced non-finite weights at step " +
                             std::to_string(k_global));
        StabilityRecord rec{k_global, std::nullopt, std::nullopt, StabilityMode::recurrent_unit,
                            GuardAction::none};
        if (mon && monitor.radius != RadiusEvaluation::none) rec.rho_exact = rep.step.rho;
        if (mon) rec.rho_frobenius = rep.rho_frobenius;
        if (monitor.guard) {
          Rates probe = scheme.state().mu;
          if (guard(rec, *monitor.guard, probe, &state) != GuardAction::none) {
            scheme.scale_base(monitor.guard->backoff);
            ++out.guard_triggers;
          }
        }
        scheme.observe(rep.step.error, colx);
        sse += rep.step.error * rep.step.error;
        abs_sum += std::abs(rep.step.error);
        out.trace.push_back(TraceRow{k_global, ep, rep.step.prediction, target, rep.step.error,
                                     detail::mean_rate(rates), rec});
        out.last_record = rec;
      } catch (const NumericAbort& ex) {
        out.status = RunStatus::numeric_abort;
        out.abort_reason = ex.what();
        out.weights = state.weights;
        out.epochs.push_back(EpochStats{ep, HUGE_VAL, HUGE_VAL});
        return run;
      }
    }
    detail::close_epoch(out, ep, sse, abs_sum, steps);
  }
  out.weights = state.weights;

  if (data.target.size() > train_end) {
    std::size_t k = layout.first;
    if (epochs == 0)
      prime_state(state, data, layout.first);
    else
      k = train_end - cfg.horizon;  // the pass continues where training stopped
    const RtrlOptions none{RadiusEvaluation::none, false};
    try {
      for (; k + cfg.horizon < data.target.size(); ++k) {
        const double target = data.target[k + cfg.horizon];
        RtrlStepReport rep = rtrl_step(state, target, next_ext(k), 0.0, none);
        if (k + cfg.horizon >= train_end) {
          run.test_predictions.push_back(rep.step.prediction);
          run.test_targets.push_back(target);
        }
      }
    } catch (const NumericAbort& ex) {
      // Frozen weights can still diverge through the feedback loop.
      out.status = RunStatus::numeric_abort;
      out.abort_reason = ex.what();
      run.test_predictions.clear();
      run.test_targets.clear();
    }
  }
  return run;
}

}  // namespace honu
