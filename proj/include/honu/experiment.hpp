#pragma once

// Experiment configuration and orchestration behind the command-line tool.
//
// A config is a flat text file of `key = value` lines; '#' starts a comment.
// Unknown keys and malformed values are rejected with the offending key in
// the message. Keys (defaults in brackets):
//
//   task            narendra | mackey-glass | csv-file          [narendra]
//   series_file     input series CSV for task=csv-file
//   snr_db          narendra noise level                         [4.83]
//   noise_variance  explicit narendra noise variance (instead of snr_db)
//   mg_tau mg_a mg_b mg_exponent mg_history mg_step mg_transient
//                   Mackey-Glass parameters          [17 0.2 0.1 10 1.2 0.1 500]
//   scale           multiplies every data sample                 [1]
//   trainer         lsm | lm | gd | rtrl                         [lsm]
//   inputs          static inputs n (series tasks)               [4]
//   order           r                                            [3]
//   horizon         n_s                                          [1]
//   feedback_taps   n_f for rtrl                                 [1]
//   external_taps   n_u for rtrl                                 [0]
//   teacher_forcing true | false                                 [false]
//   ridge           lsm ridge term                               [0]
//   lm_mu           Levenberg-Marquardt mu                       [1000]
//   lm_iterations   Levenberg-Marquardt steps                    [20]
//   scheme          fixed | norm | squared-norm | frobenius | row-norm |
//                   row-squared-norm | gngd | rr-nlms | benveniste |
//                   farhang-ang | mathews                        [fixed]
//   mu epsilon beta epsilon_min forgetting
//                   scheme constants             [0.01 1 0.001 0.0001 0.9]
//   guard           on | off                                     [off]
//   guard_threshold guard_backoff guard_reset                    [1.05 0.6 true]
//   monitor         low-rank | dense | none (recurrent radius)   [low-rank]
//   trace_every     radius cadence in steps, 0 = off             [1]
//   epochs          passes over the training window              [1]
//   train test      training / testing counts                    [300 700]
//   init            zeros | random                               [zeros]
//   init_scale      half-width of the random initial weights     [0.1]
//   seed                                                         [0]
//   sweep_inputs sweep_orders sweep_alphas
//                   comma lists for sweep-scaling     [2,10,30  2,3  0.1,...,1]
//   rho_target      sweep radius target                          [1.001]
//   sweep_batch     Gaussian samples per input size              [1000]
//
// Static tasks count train/test in patterns. For narendra a pattern is
// [1, y_p(k), y_p(k-1), u(k)] with target y_p(k+1); series tasks use the
// windows of make_supervised_windows. For rtrl, train is the number of
// steps per epoch and test the number of frozen-weight predictions after it.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "honu/adaptive_lr.hpp"
#include "honu/datagen.hpp"
#include "honu/format.hpp"
#include "honu/io.hpp"
#include "honu/polyops.hpp"
#include "honu/recurrent_unit.hpp"
#include "honu/stability.hpp"
#include "honu/static_unit.hpp"
#include "honu/training.hpp"

namespace honu {

/// Invalid configuration; field() names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& msg)
      : std::invalid_argument(field + ": " + msg), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class TaskKind { narendra, mackey_glass, csv_file };
enum class TrainerKind { lsm, lm, gd, rtrl };

struct ExperimentConfig {
  TaskKind task = TaskKind::narendra;
  std::string series_file;
  std::optional<double> snr_db = 4.83;
  std::optional<double> noise_variance;
  double mg_tau = 17.0, mg_a = 0.2, mg_b = 0.1, mg_exponent = 10.0, mg_history = 1.2,
         mg_step = 0.1;
  std::size_t mg_transient = 500;
  double scale = 1.0;

  TrainerKind trainer = TrainerKind::lsm;
  std::size_t inputs = 4;
  std::size_t order = 3;
  std::size_t horizon = 1;
  std::size_t feedback_taps = 1;
  std::size_t external_taps = 0;
  bool teacher_forcing = false;
  double ridge = 0.0;
  double lm_mu = 1000.0;
  std::size_t lm_iterations = 20;

  SchemeKind scheme = SchemeKind::fixed;
  LrState lr;
  bool guard = false;
  GuardPolicy guard_policy;
  RadiusEvaluation monitor = RadiusEvaluation::low_rank;
  std::size_t trace_every = 1;

  std::size_t epochs = 1;
  std::size_t train = 300;
  std::size_t test = 700;
  bool random_init = false;
  double init_scale = 0.1;
  std::uint64_t seed = 0;

  std::vector<std::size_t> sweep_inputs{2, 10, 30};
  std::vector<std::size_t> sweep_orders{2, 3};
  std::vector<double> sweep_alphas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double rho_target = 1.001;
  std::size_t sweep_batch = 1000;

  /// Input count of the unit the config describes.
  std::size_t unit_inputs() const {
    if (trainer == TrainerKind::rtrl) return feedback_taps + external_taps;
    if (task == TaskKind::narendra) return 3;
    return inputs;
  }

  void validate() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double cfg_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size() || !std::isfinite(out))
    throw ConfigError(key, "expected a finite number, got '" + v + "'");
  return out;
}

inline std::uint64_t cfg_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size())
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  return out;
}

inline bool cfg_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError(key, "expected true/false or on/off, got '" + v + "'");
}

template <typename T, typename F>
std::vector<T> cfg_list(const std::string& key, const std::string& v, F parse) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse(key, trim(item)));
  if (out.empty()) throw ConfigError(key, "empty list");
  return out;
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
  if (order < 1) throw ConfigError("order", "must be >= 1");
  if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
  if (!(scale > 0.0)) throw ConfigError("scale", "must be > 0");
  if (task == TaskKind::csv_file && series_file.empty())
    throw ConfigError("series_file", "required for task = csv-file");
  if (task == TaskKind::narendra && snr_db.has_value() == noise_variance.has_value())
    throw ConfigError("snr_db", "give exactly one of snr_db or noise_variance");
  if (noise_variance && *noise_variance < 0.0)
    throw ConfigError("noise_variance", "must be >= 0");
  if (trainer == TrainerKind::rtrl) {
    if (feedback_taps < 1) throw ConfigError("feedback_taps", "rtrl needs at least one");
    if (task == TaskKind::narendra && external_taps < 1)
      throw ConfigError("external_taps", "narendra rtrl needs the input u as an external tap");
  } else {
    if (task != TaskKind::narendra && inputs < 1) throw ConfigError("inputs", "must be >= 1");
    if (task == TaskKind::narendra && horizon != 1)
      throw ConfigError("horizon", "the narendra static layout predicts one step ahead");
  }
  try {
    weight_count(unit_inputs(), order);
  } catch (const std::exception& ex) {
    throw ConfigError("order", ex.what());
  }
  if (weight_count(unit_inputs(), order) > max_weight_count)
    throw ConfigError("order", "weight count " + std::to_string(weight_count(unit_inputs(), order)) +
                                   " exceeds " + std::to_string(max_weight_count));
  if (train < 1) throw ConfigError("train", "must be >= 1");
  if (trainer == TrainerKind::lm && !(lm_mu > 0.0)) throw ConfigError("lm_mu", "must be > 0");
  if (ridge < 0.0) throw ConfigError("ridge", "must be >= 0");
  if (lr.mu < 0.0) throw ConfigError("mu", "must be >= 0");
  if (lr.epsilon < 0.0) throw ConfigError("epsilon", "must be >= 0");
  if (!(lr.beta > 0.0)) throw ConfigError("beta", "must be > 0");
  if (lr.epsilon_min < 0.0) throw ConfigError("epsilon_min", "must be >= 0");
  if (!(lr.forgetting > 0.0 && lr.forgetting < 1.0))
    throw ConfigError("forgetting", "must lie in (0, 1)");
  if (guard_policy.threshold < 1.0) throw ConfigError("guard_threshold", "must be >= 1");
  if (!(guard_policy.backoff > 0.0 && guard_policy.backoff < 1.0))
    throw ConfigError("guard_backoff", "must lie in (0, 1)");
  if (!(init_scale > 0.0)) throw ConfigError("init_scale", "must be > 0");
  for (double a : sweep_alphas)
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("sweep_alphas", "every alpha must lie in (0, 1]");
  for (auto n : sweep_inputs)
    if (n < 1) throw ConfigError("sweep_inputs", "every n must be >= 1");
  for (auto r : sweep_orders)
    if (r < 1) throw ConfigError("sweep_orders", "every r must be >= 1");
  if (!(rho_target > 1.0)) throw ConfigError("rho_target", "must be > 1");
  if (sweep_batch < 1) throw ConfigError("sweep_batch", "must be >= 1");
}

/// Parses config text; values not given keep their defaults.
inline ExperimentConfig parse_config(std::istream& is) {
  using namespace detail;
  ExperimentConfig c;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string v = trim(std::string_view(body).substr(eq + 1));
    if (auto [it, fresh] = seen.emplace(key, lineno); !fresh)
      throw ConfigError(key, "given twice (lines " + std::to_string(it->second) + " and " +
                                 std::to_string(lineno) + ")");
    auto size = [&] { return static_cast<std::size_t>(cfg_u64(key, v)); };
    auto num = [&] { return cfg_double(key, v); };

    if (key == "task") {
      if (v == "narendra") c.task = TaskKind::narendra;
      else if (v == "mackey-glass") c.task = TaskKind::mackey_glass;
      else if (v == "csv-file") c.task = TaskKind::csv_file;
      else throw ConfigError(key, "expected narendra, mackey-glass or csv-file, got '" + v + "'");
    } else if (key == "series_file") {
      c.series_file = v;
    } else if (key == "snr_db") {
      c.snr_db = num();
    } else if (key == "noise_variance") {
      c.noise_variance = num();
      if (!seen.count("snr_db")) c.snr_db.reset();
    } else if (key == "mg_tau") { c.mg_tau = num();
    } else if (key == "mg_a") { c.mg_a = num();
    } else if (key == "mg_b") { c.mg_b = num();
    } else if (key == "mg_exponent") { c.mg_exponent = num();
    } else if (key == "mg_history") { c.mg_history = num();
    } else if (key == "mg_step") { c.mg_step = num();
    } else if (key == "mg_transient") { c.mg_transient = size();
    } else if (key == "scale") { c.scale = num();
    } else if (key == "trainer") {
      if (v == "lsm") c.trainer = TrainerKind::lsm;
      else if (v == "lm") c.trainer = TrainerKind::lm;
      else if (v == "gd") c.trainer = TrainerKind::gd;
      else if (v == "rtrl") c.trainer = TrainerKind::rtrl;
      else throw ConfigError(key, "expected lsm, lm, gd or rtrl, got '" + v + "'");
    } else if (key == "inputs") { c.inputs = size();
    } else if (key == "order") { c.order = size();
    } else if (key == "horizon") { c.horizon = size();
    } else if (key == "feedback_taps") { c.feedback_taps = size();
    } else if (key == "external_taps") { c.external_taps = size();
    } else if (key == "teacher_forcing") { c.teacher_forcing = cfg_bool(key, v);
    } else if (key == "ridge") { c.ridge = num();
    } else if (key == "lm_mu") { c.lm_mu = num();
    } else if (key == "lm_iterations") { c.lm_iterations = size();
    } else if (key == "scheme") {
      auto k = parse_scheme(v);
      if (!k) throw ConfigError(key, "unknown scheme '" + v + "'");
      c.scheme = *k;
    } else if (key == "mu") { c.lr.mu = num();
    } else if (key == "epsilon") { c.lr.epsilon = num();
    } else if (key == "beta") { c.lr.beta = num();
    } else if (key == "epsilon_min") { c.lr.epsilon_min = num();
    } else if (key == "forgetting") { c.lr.forgetting = num();
    } else if (key == "guard") { c.guard = cfg_bool(key, v);
    } else if (key == "guard_threshold") { c.guard_policy.threshold = num();
    } else if (key == "guard_backoff") { c.guard_policy.backoff = num();
    } else if (key == "guard_reset") { c.guard_policy.reset_jacobian = cfg_bool(key, v);
    } else if (key == "monitor") {
      if (v == "low-rank") c.monitor = RadiusEvaluation::low_rank;
      else if (v == "dense") c.monitor = RadiusEvaluation::dense;
      else if (v == "none") c.monitor = RadiusEvaluation::none;
      else throw ConfigError(key, "expected low-rank, dense or none, got '" + v + "'");
    } else if (key == "trace_every") { c.trace_every = size();
    } else if (key == "epochs") { c.epochs = size();
    } else if (key == "train") { c.train = size();
    } else if (key == "test") { c.test = size();
    } else if (key == "init") {
      if (v == "zeros") c.random_init = false;
      else if (v == "random") c.random_init = true;
      else throw ConfigError(key, "expected zeros or random, got '" + v + "'");
    } else if (key == "init_scale") { c.init_scale = num();
    } else if (key == "seed") { c.seed = cfg_u64(key, v);
    } else if (key == "sweep_inputs") {
      c.sweep_inputs = cfg_list<std::size_t>(key, v, [](auto& k, auto s) {
        return static_cast<std::size_t>(cfg_u64(k, s));
      });
    } else if (key == "sweep_orders") {
      c.sweep_orders = cfg_list<std::size_t>(key, v, [](auto& k, auto s) {
        return static_cast<std::size_t>(cfg_u64(k, s));
      });
    } else if (key == "sweep_alphas") {
      c.sweep_alphas = cfg_list<double>(key, v, [](auto& k, auto s) { return cfg_double(k, s); });
    } else if (key == "rho_target") { c.rho_target = num();
    } else if (key == "sweep_batch") { c.sweep_batch = size();
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  c.validate();
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("--config", "cannot read '" + path + "'");
  return parse_config(is);
}

// ---- data ---------------------------------------------------------------

namespace detail {

/// splitmix64, to derive independent stream seeds from one run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Samples needed from the generator for the configured split.
inline std::size_t required_length(const ExperimentConfig& c) {
  if (c.trainer == TrainerKind::rtrl)
    return std::max(c.feedback_taps, c.external_taps) - 1 + c.horizon + c.train + c.test;
  if (c.task == TaskKind::narendra) return c.train + c.test + 2;
  return c.train + c.test + c.inputs + c.horizon - 1;
}

/// The data of one experiment: the main series plus, for narendra, the
/// input u and the noiseless output.
struct ExperimentData {
  TimeSeries series;        // y_p for narendra, the signal otherwise
  std::vector<double> u;    // narendra only
  std::vector<double> y_true;
  double snr_db = HUGE_VAL;
};

inline ExperimentData generate_data(const ExperimentConfig& c) {
  ExperimentData d;
  const std::size_t n = required_length(c);
  if (c.task == TaskKind::narendra) {
    const NoiseSpec spec = c.noise_variance ? NoiseSpec::with_variance(*c.noise_variance)
                                            : NoiseSpec::with_snr(*c.snr_db);
    auto s = narendra_series(n, detail::derive_seed(c.seed, 0), detail::derive_seed(c.seed, 1),
                             spec);
    d.series.samples = scale_inputs(s.y_p, c.scale);
    d.u = scale_inputs(s.u, c.scale);
    d.y_true = scale_inputs(s.y_true, c.scale);
    d.snr_db = s.snr_db;
    d.series.generator = "narendra";
    d.series.parameters = {{"channel", "y_p"},
                           {"snr_db", format_double(s.snr_db)},
                           {"scale", format_double(c.scale)}};
  } else if (c.task == TaskKind::mackey_glass) {
    MackeyGlassParams p;
    p.length = n;
    p.tau = c.mg_tau;
    p.a = c.mg_a;
    p.b = c.mg_b;
    p.exponent = c.mg_exponent;
    p.history = c.mg_history;
    p.step = c.mg_step;
    p.transient = c.mg_transient;
    d.series = mackey_glass(p);
    d.series.samples = scale_inputs(d.series.samples, c.scale);
    d.series.parameters.emplace_back("scale", format_double(c.scale));
  } else {
    try {
      d.series = load_series_csv(c.series_file);
    } catch (const FormatError& ex) {
      throw ConfigError("series_file", ex.what());
    }
    if (d.series.size() < n)
      throw ConfigError("series_file", "has " + std::to_string(d.series.size()) +
                                           " samples, the split needs " + std::to_string(n));
    d.series.samples.resize(n);
    d.series.samples = scale_inputs(d.series.samples, c.scale);
  }
  d.series.seed = c.seed;
  return d;
}

/// Static patterns and targets for the whole split (train rows first).
struct StaticDataset {
  TrainingSet all;
  std::vector<double> true_targets;  // narendra only
};

inline StaticDataset static_dataset(const ExperimentConfig& c, const ExperimentData& d) {
  const std::size_t count = c.train + c.test;
  if (c.task == TaskKind::narendra) {
    Matrix p(static_cast<Eigen::Index>(count), 4);
    Vector t(static_cast<Eigen::Index>(count));
    std::vector<double> truth(count);
    const auto& yp = d.series.samples;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t k = i + 1;
      const auto row = static_cast<Eigen::Index>(i);
      p.row(row) << 1.0, yp[k], yp[k - 1], d.u[k];
      t[row] = yp[k + 1];
      truth[i] = d.y_true[k + 1];
    }
    return StaticDataset{TrainingSet(std::move(p), std::move(t)), std::move(truth)};
  }
  TrainingSet w = make_supervised_windows(d.series.samples, c.inputs, c.horizon);
  return StaticDataset{w.slice(0, static_cast<Eigen::Index>(count)), {}};
}

// ---- running ------------------------------------------------------------

struct ErrorSummary {
  double mae = 0.0;
  double sse = 0.0;
  std::optional<double> mae_true;  // against the noiseless signal
};

struct ExperimentResult {
  ExperimentConfig config;
  ExperimentData data;
  TrainResult training;
  ErrorSummary train_error;
  ErrorSummary test_error;
  std::size_t test_count = 0;
};

namespace detail {

inline ErrorSummary error_summary(std::span<const double> y, std::span<const double> target,
                                  std::span<const double> truth = {}) {
  ErrorSummary s;
  if (y.empty()) return s;
  double abs_sum = 0.0, true_sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = target[i] - y[i];
    abs_sum += std::abs(e);
    s.sse += e * e;
    if (!truth.empty()) true_sum += std::abs(truth[i] - y[i]);
  }
  s.mae = abs_sum / static_cast<double>(y.size());
  if (!truth.empty()) s.mae_true = true_sum / static_cast<double>(y.size());
  return s;
}

inline LearningRateScheme make_scheme(const ExperimentConfig& c) {
  return LearningRateScheme(c.scheme, c.lr);
}

inline MonitorOptions make_monitor(const ExperimentConfig& c) {
  MonitorOptions m;
  m.every = c.trace_every;
  m.radius = c.monitor;
  m.frobenius = true;
  if (c.guard) m.guard = c.guard_policy;
  return m;
}

}  // namespace detail

/// Runs the configured experiment. Deterministic given the config (which
/// includes the seed); numeric blow-up ends the run with status
/// numeric_abort and the last stability record instead of throwing.
inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  c.validate();
  ExperimentResult res{c, generate_data(c), TrainResult(WeightVector::zeros(make_basis(
                                                            c.unit_inputs(), c.order))),
                       {}, {}, 0};
  auto basis = make_basis(c.unit_inputs(), c.order);
  WeightVector init = c.random_init
                          ? WeightVector::random(basis, detail::derive_seed(c.seed, 2), c.init_scale)
                          : WeightVector::zeros(basis);

  if (c.trainer == TrainerKind::rtrl) {
    RecurrentConfig rc{c.feedback_taps, c.external_taps, c.horizon, c.order, c.teacher_forcing};
    SequenceData seq;
    seq.target = res.data.series.samples;
    seq.external = c.task == TaskKind::narendra ? res.data.u : res.data.series.samples;
    if (c.external_taps == 0) seq.external.clear();
    const std::size_t train_end = std::max(c.feedback_taps, c.external_taps) - 1 + c.horizon + c.train;
    RecurrentRun run = train_rtrl(RecurrentState(rc, init), seq, train_end,
                                  detail::make_scheme(c), c.epochs, detail::make_monitor(c));
    res.training = std::move(run.result);
    if (!res.training.trace.empty()) {
      std::vector<double> y, t;
      for (const auto& row : res.training.trace)
        if (row.epoch == res.training.epochs.size()) {
          y.push_back(row.y);
          t.push_back(row.y_p);
        }
      res.train_error = detail::error_summary(y, t);
    }
    if (res.training.status == RunStatus::ok) {
      std::vector<double> truth;
      if (c.task == TaskKind::narendra)
        truth.assign(res.data.y_true.end() - static_cast<std::ptrdiff_t>(run.test_targets.size()),
                     res.data.y_true.end());
      res.test_error = detail::error_summary(run.test_predictions, run.test_targets, truth);
      res.test_count = run.test_predictions.size();
    }
    return res;
  }

  const StaticDataset ds = static_dataset(c, res.data);
  const auto n_train = static_cast<Eigen::Index>(c.train);
  const auto n_test = static_cast<Eigen::Index>(c.test);
  const TrainingSet train = ds.all.slice(0, n_train);
  const TrainingSet test = ds.all.slice(n_train, n_test);

  TrainResult& tr = res.training;
  tr = TrainResult(init);
  try {
    switch (c.trainer) {
      case TrainerKind::lsm:
        tr.weights = lsm_fit(train, c.order, c.ridge);
        break;
      case TrainerKind::lm:
        for (std::size_t it = 1; it <= c.lm_iterations; ++it) {
          tr.weights = lm_step(tr.weights, train, c.lm_mu).weights;
          const Vector y = forward_batch(tr.weights, train.patterns());
          const auto s = detail::error_summary(std::span(y.data(), static_cast<std::size_t>(y.size())),
                                               std::span(train.targets().data(), y.size()));
          tr.epochs.push_back(EpochStats{it, s.sse, s.mae});
        }
        break;
      case TrainerKind::gd:
        tr = train_static_gd(init, train, detail::make_scheme(c), c.epochs,
                             detail::make_monitor(c));
        break;
      case TrainerKind::rtrl:
        break;
    }
  } catch (const NumericAbort& ex) {
    tr.status = RunStatus::numeric_abort;
    tr.abort_reason = ex.what();
  }
  if (tr.status == RunStatus::numeric_abort) return res;

  auto as_span = [](const Vector& v) {
    return std::span<const double>(v.data(), static_cast<std::size_t>(v.size()));
  };
  const Vector y_train = forward_batch(tr.weights, train.patterns());
  res.train_error = detail::error_summary(as_span(y_train), as_span(train.targets()));
  const Vector y_test = forward_batch(tr.weights, test.patterns());
  std::span<const double> truth;
  if (!ds.true_targets.empty())
    truth = std::span<const double>(ds.true_targets).subspan(c.train, c.test);
  res.test_error = detail::error_summary(as_span(y_test), as_span(test.targets()), truth);
  res.test_count = c.test;
  return res;
}

inline std::string_view to_string(TaskKind t) {
  switch (t) {
    case TaskKind::narendra: return "narendra";
    case TaskKind::mackey_glass: return "mackey-glass";
    case TaskKind::csv_file: return "csv-file";
  }
  return "?";
}

inline std::string_view to_string(TrainerKind t) {
  switch (t) {
    case TrainerKind::lsm: return "lsm";
    case TrainerKind::lm: return "lm";
    case TrainerKind::gd: return "gd";
    case TrainerKind::rtrl: return "rtrl";
  }
  return "?";
}

namespace detail {

/// Non-finite numbers are stored as strings ("nan", "inf").
inline nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline nlohmann::json error_json(const ErrorSummary& s) {
  nlohmann::json j{{"mae", number(s.mae)}, {"sse", number(s.sse)}};
  if (s.mae_true) j["mae_true"] = number(*s.mae_true);
  return j;
}

}  // namespace detail

inline nlohmann::json summary_json(const ExperimentResult& r) {
  const auto& c = r.config;
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : r.training.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"sse", detail::number(e.sse)},
                      {"mae", detail::number(e.mae)}});
  nlohmann::json j{{"schema", "honu-summary/1"},
                   {"task", std::string(to_string(c.task))},
                   {"trainer", std::string(to_string(c.trainer))},
                   {"scheme", std::string(to_string(c.scheme))},
                   {"seed", c.seed},
                   {"n", c.unit_inputs()},
                   {"r", c.order},
                   {"n_w", weight_count(c.unit_inputs(), c.order)},
                   {"status", std::string(to_string(r.training.status))},
                   {"steps", r.training.trace.size()},
                   {"guard_triggers", r.training.guard_triggers},
                   {"epochs", std::move(epochs)},
                   {"train", detail::error_json(r.train_error)},
                   {"test", detail::error_json(r.test_error)},
                   {"test_count", r.test_count}};
  if (c.task == TaskKind::narendra) j["snr_db"] = detail::number(r.data.snr_db);
  if (r.training.status != RunStatus::ok) j["abort_reason"] = r.training.abort_reason;
  if (r.training.last_record) j["last_record"] = record_to_json(*r.training.last_record);
  return j;
}

/// Writes trace.csv, summary.json, weights.csv and series.csv into dir.
inline void write_outputs(const ExperimentResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw FormatError("cannot write " + (dir / name).string());
    return os;
  };
  {
    auto os = open("trace.csv");
    write_trace_csv(os, r.training.trace);
  }
  {
    auto os = open("summary.json");
    os << summary_json(r).dump(2) << '\n';
  }
  {
    auto os = open("weights.csv");
    write_weights_csv(os, r.training.weights);
  }
  {
    auto os = open("series.csv");
    write_series_csv(os, r.data.series);
  }
}

// ---- scaling sweep ------------------------------------------------------

struct SweepPoint {
  std::size_t n = 0;
  std::size_t r = 0;
  double alpha = 0.0;
  double mu_star = 0.0;
  double rho = 0.0;  // radius reached at mu_star
};

struct RadiusPoint {
  std::size_t n = 0;
  std::size_t r = 0;
  double mu = 0.0;
  double rho = 0.0;
};

struct SweepSlope {
  std::size_t n = 0;
  std::size_t r = 0;
  double slope = 0.0;  // least-squares d log mu* / d log alpha
};

struct SweepResult {
  std::vector<SweepPoint> points;   // grid order: r, n, alpha
  std::vector<RadiusPoint> curve;   // rho over a mu grid at alpha = 1
  std::vector<SweepSlope> slopes;
};

/// Worst-case static radius over a batch of expansions.
inline double batch_radius(double mu, const std::vector<Vector>& colx) {
  double rho = 1.0;
  for (const auto& x : colx) rho = std::max(rho, static_radius_closed_form(mu, x));
  return rho;
}

/// Smallest mu whose batch radius reaches the target, by bisection until
/// the radius is within tol of the target. Throws ConvergenceError if no
/// bracket is found.
inline double bisect_mu(const std::vector<Vector>& colx, double target, double tol = 1e-6) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; batch_radius(hi, colx) < target; ++i) {
    if (i > 200) throw ConvergenceError("bisect_mu: no bracket for the radius target", hi);
    hi *= 2.0;
  }
  for (int i = 0; i < 400; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double rho = batch_radius(mid, colx);
    if (std::abs(rho - target) <= tol) return mid;
    if (rho < target) lo = mid; else hi = mid;
    if (hi - lo <= 1e-300) break;
  }
  const double mid = 0.5 * (lo + hi);
  if (std::abs(batch_radius(mid, colx) - target) > tol)
    throw ConvergenceError("bisect_mu: bisection stalled short of the radius target",
                           batch_radius(mid, colx));
  return mid;
}

/// Ordinary least-squares slope of y against x.
inline double fit_slope(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

/// For every (r, n, alpha): the mu at which the worst-case closed-form
/// static radius over `sweep_batch` Gaussian unit-variance inputs, scaled
/// by alpha, reaches rho_target. All input sizes draw from one pool of
/// samples (the first n columns), so larger n only adds components.
inline SweepResult sweep_scaling(const ExperimentConfig& c) {
  c.validate();
  SweepResult out;
  const std::size_t n_max = *std::max_element(c.sweep_inputs.begin(), c.sweep_inputs.end());
  std::mt19937_64 rng(detail::derive_seed(c.seed, 3));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix pool(static_cast<Eigen::Index>(c.sweep_batch), static_cast<Eigen::Index>(n_max));
  for (Eigen::Index i = 0; i < pool.rows(); ++i)
    for (Eigen::Index j = 0; j < pool.cols(); ++j) pool(i, j) = gauss(rng);

  for (std::size_t r : c.sweep_orders) {
    for (std::size_t n : c.sweep_inputs) {
      const MonomialBasis basis(n, r);
      std::vector<double> log_a, log_mu;
      std::vector<Vector> at_one;
      for (double alpha : c.sweep_alphas) {
        std::vector<Vector> colx;
        colx.reserve(c.sweep_batch);
        for (Eigen::Index i = 0; i < pool.rows(); ++i) {
          Vector x(static_cast<Eigen::Index>(n + 1));
          x[0] = 1.0;
          x.tail(static_cast<Eigen::Index>(n)) =
              alpha * pool.row(i).head(static_cast<Eigen::Index>(n)).transpose();
          colx.push_back(basis.expand(x));
        }
        const double mu = bisect_mu(colx, c.rho_target);
        out.points.push_back(SweepPoint{n, r, alpha, mu, batch_radius(mu, colx)});
        log_a.push_back(std::log(alpha));
        log_mu.push_back(std::log(mu));
        if (alpha == 1.0) at_one = std::move(colx);
      }
      out.slopes.push_back(SweepSlope{n, r, log_a.size() > 1 ? fit_slope(log_a, log_mu) : 0.0});
      if (!at_one.empty()) {
        // rho over mu in [0, 2 mu*] at alpha = 1.
        const double mu_star = out.points.back().alpha == 1.0 ? out.points.back().mu_star
                                                              : bisect_mu(at_one, c.rho_target);
        for (int i = 0; i <= 20; ++i) {
          const double mu = mu_star * 0.1 * i;
          out.curve.push_back(RadiusPoint{n, r, mu, batch_radius(mu, at_one)});
        }
      }
    }
  }
  return out;
}

inline void write_sweep_csv(std::ostream& os, const SweepResult& s) {
  os << "n,r,alpha,mu_star,rho\n";
  for (const auto& p : s.points)
    os << p.n << ',' << p.r << ',' << format_double(p.alpha) << ',' << format_double(p.mu_star)
       << ',' << format_double(p.rho) << '\n';
}

inline void write_radius_curve_csv(std::ostream& os, const SweepResult& s) {
  os << "n,r,mu,rho\n";
  for (const auto& p : s.curve)
    os << p.n << ',' << p.r << ',' << format_double(p.mu) << ',' << format_double(p.rho) << '\n';
}

// ---- describe -----------------------------------------------------------

/// Monomial table and dimension report of the configured unit.
inline void describe(const ExperimentConfig& c, std::ostream& os) {
  const std::size_t n = c.unit_inputs();
  const MonomialBasis basis(n, c.order);
  const double n_w = static_cast<double>(basis.size());
  os << "inputs n = " << n;
  if (c.trainer == TrainerKind::rtrl)
    os << " (" << c.feedback_taps << " feedback + " << c.external_taps << " external)";
  os << "\norder r = " << c.order << "\nweights n_w = " << basis.size()
     << "\norder hash = " << detail::hash_hex(basis.order_hash())
     << "\nmemory: weights " << format_double(n_w * 8) << " B, update matrix "
     << format_double(n_w * n_w * 8) << " B";
  if (c.trainer == TrainerKind::rtrl)
    os << ", sensitivities " << format_double(static_cast<double>(n + 1) * n_w * 8) << " B";
  os << "\n";
  if (c.order == 1) os << "layout: linear filter (bias + one weight per input)\n";
  os << "q,monomial\n";
  for (std::size_t q = 0; q < basis.size(); ++q) {
    os << q << ',';
    bool any = false;
    for (std::size_t m = 0; m < basis.order(); ++m) {
      const auto f = basis.factor(q, m);
      if (f == 0) continue;
      if (any) os << '*';
      os << 'x' << f;
      any = true;
    }
    if (!any) os << '1';
    os << '\n';
  }
}

}  // namespace honu
