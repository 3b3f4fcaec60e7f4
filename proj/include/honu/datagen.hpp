#pragma once

// Benchmark signals and preprocessing. Every generator is a pure function of
// its parameters and seeds.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "honu/format.hpp"
#include "honu/polyops.hpp"
#include "honu/static_unit.hpp"
#include "honu/types.hpp"

namespace honu {

struct TimeSeries {
  std::vector<double> samples;
  double dt = 1.0;  // seconds between samples
  std::uint64_t seed = 0;
  std::string generator;
  /// Generator parameters in the order they were recorded.
  std::vector<std::pair<std::string, std::string>> parameters;

  std::size_t size() const noexcept { return samples.size(); }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;
};

/// Either a target SNR or an explicit noise variance.
struct NoiseSpec {
  std::optional<double> snr_db;
  std::optional<double> variance;

  static NoiseSpec with_snr(double db) { return NoiseSpec{db, std::nullopt}; }
  static NoiseSpec with_variance(double v) { return NoiseSpec{std::nullopt, v}; }
};

/// Mean square of a signal.
inline double power(std::span<const double> s) {
  if (s.empty()) return 0.0;
  double acc = 0.0;
  for (double v : s) acc += v * v;
  return acc / static_cast<double>(s.size());
}

/// 10 log10(E[signal^2] / E[noise^2]); +inf when the noise power is zero.
inline double snr_db(std::span<const double> signal, std::span<const double> noise) {
  const double pn = power(noise);
  if (pn == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(power(signal) / pn);
}

struct NarendraSeries {
  std::vector<double> y_true;
  std::vector<double> y_p;  // y_true plus measurement noise
  std::vector<double> u;
  std::vector<double> noise;
  double snr_db = 0.0;  // realized
};

/// y_true(k+1) = y_true(k) / (1 + y_true(k)^2) + u(k)^3, y_true(0) = 0.
///
/// u and the noise are independent zero-mean unit-variance Gaussian
/// sequences drawn from their own seeds. The noise is scaled either to the
/// requested variance or so that E[y_true^2] / sigma^2 hits the requested
/// SNR; the realized SNR of the scaled noise is reported.
inline NarendraSeries narendra_series(std::size_t length, std::uint64_t seed_u,
                                      std::uint64_t seed_noise, const NoiseSpec& noise) {
  detail::require(length >= 2, "narendra_series: length must be >= 2");
  detail::require(noise.snr_db.has_value() != noise.variance.has_value(),
                  "narendra_series: give exactly one of snr_db or variance");
  NarendraSeries out;
  out.u.resize(length);
  out.y_true.resize(length);
  out.noise.resize(length);
  std::mt19937_64 rng_u(seed_u);
  std::mt19937_64 rng_e(seed_noise);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& v : out.u) v = gauss(rng_u);
  std::vector<double> unit_noise(length);
  for (auto& v : unit_noise) v = gauss(rng_e);

  out.y_true[0] = 0.0;
  for (std::size_t k = 0; k + 1 < length; ++k) {
    const double y = out.y_true[k];
    out.y_true[k + 1] = y / (1.0 + y * y) + out.u[k] * out.u[k] * out.u[k];
  }

  double sigma = 0.0;
  if (noise.variance) {
    detail::require(*noise.variance >= 0.0, "narendra_series: noise variance must be >= 0");
    sigma = std::sqrt(*noise.variance);
  } else {
    detail::require(std::isfinite(*noise.snr_db), "narendra_series: SNR must be finite");
    sigma = std::sqrt(power(out.y_true) / std::pow(10.0, *noise.snr_db / 10.0));
  }
  out.y_p.resize(length);
  for (std::size_t k = 0; k < length; ++k) {
    out.noise[k] = sigma * unit_noise[k];
    out.y_p[k] = out.y_true[k] + out.noise[k];
  }
  out.snr_db = snr_db(out.y_true, out.noise);
  return out;
}

struct MackeyGlassParams {
  std::size_t length = 1000;  // emitted samples
  double dt = 1.0;            // sampling period
  double step = 0.1;          // RK4 step; dt must be a multiple of it
  double tau = 17.0;
  double a = 0.2;
  double b = 0.1;
  double exponent = 10.0;     // c in x(t - tau)^c
  double history = 1.2;       // constant history on [-tau, 0]
  /// Optional history function on [-tau, 0]; overrides the constant.
  std::function<double(double)> history_fn;
  std::size_t transient = 0;  // samples discarded before emitting
};

/// x'(t) = a x(t - tau) / (1 + x(t - tau)^c) - b x(t), integrated by
/// classical RK4 with a delay buffer.
///
/// Delayed values between grid points come from cubic Hermite interpolation
/// on the stored solution and its derivative, which keeps the scheme
/// fourth-order. Throws NumericAbort if the solution leaves the finite range.
inline TimeSeries mackey_glass(const MackeyGlassParams& p) {
  detail::require(p.tau > 0.0, "mackey_glass: tau must be > 0");
  detail::require(p.step > 0.0 && p.step <= p.tau, "mackey_glass: need 0 < step <= tau");
  detail::require(p.dt > 0.0, "mackey_glass: dt must be > 0");
  const double ratio = p.dt / p.step;
  const auto per_sample = static_cast<std::size_t>(std::llround(ratio));
  detail::require(per_sample >= 1 && std::abs(ratio - static_cast<double>(per_sample)) < 1e-9,
                  "mackey_glass: dt must be an integer multiple of step");
  double delay_steps = p.tau / p.step;
  if (std::abs(delay_steps - std::round(delay_steps)) < 1e-9) delay_steps = std::round(delay_steps);

  auto hist = [&p](double t) { return p.history_fn ? p.history_fn(t) : p.history; };
  auto rhs = [&p](double x, double xd) {
    return p.a * xd / (1.0 + std::pow(xd, p.exponent)) - p.b * x;
  };

  const std::size_t total_samples = p.transient + p.length;
  const std::size_t total_steps = (total_samples == 0 ? 0 : total_samples - 1) * per_sample;
  std::vector<double> x(total_steps + 1);
  std::vector<double> f(total_steps + 1);
  x[0] = hist(0.0);

  // Delayed value at grid position pos (in steps, may be fractional or < 0).
  auto delayed = [&](double pos) {
    if (pos <= 0.0) return hist(pos * p.step);
    const double j = std::floor(pos);
    const auto i = static_cast<std::size_t>(j);
    const double s = pos - j;
    if (s == 0.0) return x[i];
    const double s2 = s * s;
    const double s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * x[i] + (s3 - 2 * s2 + s) * p.step * f[i] +
           (-2 * s3 + 3 * s2) * x[i + 1] + (s3 - s2) * p.step * f[i + 1];
  };

  const double h = p.step;
  for (std::size_t j = 0; j < total_steps; ++j) {
    const double jd = static_cast<double>(j);
    const double k1 = rhs(x[j], delayed(jd - delay_steps));
    f[j] = k1;
    const double xd_mid = delayed(jd + 0.5 - delay_steps);
    const double k2 = rhs(x[j] + 0.5 * h * k1, xd_mid);
    const double k3 = rhs(x[j] + 0.5 * h * k2, xd_mid);
    const double k4 = rhs(x[j] + h * k3, delayed(jd + 1.0 - delay_steps));
    x[j + 1] = x[j] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!std::isfinite(x[j + 1]))
      throw NumericAbort("mackey_glass: solution diverged at t = " +
                         format_double(static_cast<double>(j + 1) * h));
  }

  TimeSeries out;
  out.dt = p.dt;
  out.generator = "mackey_glass";
  out.parameters = {{"tau", format_double(p.tau)},
                    {"a", format_double(p.a)},
                    {"b", format_double(p.b)},
                    {"exponent", format_double(p.exponent)},
                    {"step", format_double(p.step)},
                    {"history", p.history_fn ? std::string("function") : format_double(p.history)},
                    {"transient", std::to_string(p.transient)}};
  out.samples.reserve(p.length);
  for (std::size_t i = p.transient; i < total_samples; ++i) out.samples.push_back(x[i * per_sample]);
  return out;
}

/// Multiplies every non-bias component by alpha.
inline AugmentedInput scale_inputs(const AugmentedInput& x, double alpha) {
  detail::require(std::isfinite(alpha) && alpha > 0.0, "scale_inputs: alpha must be > 0");
  Vector v = x.values();
  v.tail(v.size() - 1) *= alpha;
  return AugmentedInput::from_augmented(std::move(v));
}

/// Multiplies every sample by alpha (a series carries no bias).
inline std::vector<double> scale_inputs(std::span<const double> series, double alpha) {
  detail::require(std::isfinite(alpha) && alpha > 0.0, "scale_inputs: alpha must be > 0");
  std::vector<double> out(series.begin(), series.end());
  for (auto& v : out) v *= alpha;
  return out;
}

/// Tapped-delay embedding. Pattern k (k = n_delays - 1 ... N - n_s - 1) is
/// [1, s(k), s(k-1), ..., s(k - n_delays + 1)] with target s(k + n_s), so
/// there are N - n_delays - n_s + 1 patterns in time order.
inline TrainingSet make_supervised_windows(std::span<const double> series, std::size_t n_delays,
                                           std::size_t horizon) {
  detail::require(n_delays >= 1, "make_supervised_windows: n_delays must be >= 1");
  detail::require(horizon >= 1, "make_supervised_windows: horizon n_s must be >= 1");
  if (series.size() < n_delays + horizon)
    throw std::invalid_argument("make_supervised_windows: series of " +
                                std::to_string(series.size()) + " samples is too short for " +
                                std::to_string(n_delays) + " delays and horizon " +
                                std::to_string(horizon));
  const std::size_t count = series.size() - n_delays - horizon + 1;
  Matrix patterns(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(n_delays + 1));
  Vector targets(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t k = i + n_delays - 1;
    const auto row = static_cast<Eigen::Index>(i);
    patterns(row, 0) = 1.0;
    for (std::size_t d = 0; d < n_delays; ++d)
      patterns(row, static_cast<Eigen::Index>(d + 1)) = series[k - d];
    targets[row] = series[k + horizon];
  }
  return TrainingSet(std::move(patterns), std::move(targets));
}

}  // namespace honu
