#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "honu/experiment.hpp"

namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("honu_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string field_of(const std::string& text) {
  try {
    honu::parse_config_text(text);
  } catch (const honu::ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

TEST(Config, ParsesKeysAndComments) {
  const auto c = honu::parse_config_text(
      "# comment\n"
      "task = mackey-glass\n"
      "trainer = gd   # trailing comment\n"
      "inputs = 5\n order = 2\n"
      "scheme = row-squared-norm\n"
      "mu = 0.5\n"
      "sweep_alphas = 0.5, 1\n");
  EXPECT_EQ(c.task, honu::TaskKind::mackey_glass);
  EXPECT_EQ(c.trainer, honu::TrainerKind::gd);
  EXPECT_EQ(c.inputs, 5u);
  EXPECT_EQ(c.order, 2u);
  EXPECT_EQ(c.scheme, honu::SchemeKind::row_squared_norm);
  EXPECT_EQ(c.lr.mu, 0.5);
  EXPECT_EQ(c.sweep_alphas, (std::vector<double>{0.5, 1.0}));
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(field_of("bogus = 1\n"), "bogus");
  EXPECT_EQ(field_of("order = two\n"), "order");
  EXPECT_EQ(field_of("order = 0\n"), "order");
  EXPECT_EQ(field_of("trainer = sgd\n"), "trainer");
  EXPECT_EQ(field_of("mu = 1\nmu = 2\n"), "mu");
  EXPECT_EQ(field_of("mu = -1\n"), "mu");
  EXPECT_EQ(field_of("sweep_alphas = 0.5, 1.5\n"), "sweep_alphas");
  EXPECT_EQ(field_of("trainer = rtrl\nfeedback_taps = 0\n"), "feedback_taps");
  EXPECT_EQ(field_of("task = csv-file\n"), "series_file");
  EXPECT_EQ(field_of("just words\n"), "line 1");
  EXPECT_EQ(field_of("trainer = gd\nepochs = 0\n"), "<accepted>");
}

TEST(Experiment, ZeroEpochGradientRunLeavesWeights) {
  auto c = honu::parse_config_text("trainer = gd\ninit = random\norder = 2\nepochs = 0\n");
  const auto init = honu::WeightVector::random(honu::make_basis(c.unit_inputs(), c.order),
                                               honu::detail::derive_seed(c.seed, 2), c.init_scale);
  const auto r = honu::run_experiment(c);
  EXPECT_EQ(r.training.weights.values, init.values);
  EXPECT_TRUE(r.training.trace.empty());
  EXPECT_TRUE(r.training.epochs.empty());
  EXPECT_EQ(r.training.status, honu::RunStatus::ok);
}

TEST(Experiment, TraceRowPerStepWithRadiusCadence) {
  auto c = honu::parse_config_text(
      "trainer = gd\norder = 2\nscheme = squared-norm\nmu = 0.5\nepochs = 2\ntrain = 50\n"
      "test = 10\ntrace_every = 7\n");
  const auto r = honu::run_experiment(c);
  ASSERT_EQ(r.training.trace.size(), 100u);
  for (const auto& row : r.training.trace) {
    EXPECT_EQ(row.record.rho_exact.has_value(), row.k % 7 == 0) << row.k;
    EXPECT_EQ(row.epoch, row.k / 50 + 1);
  }
  ASSERT_EQ(r.training.epochs.size(), 2u);
}

TEST(Experiment, ByteIdenticalOutputs) {
  auto c = honu::load_config(HONU_SOURCE_DIR "/configs/narendra_gd.cfg");
  c.epochs = 2;
  const auto a = scratch("det_a"), b = scratch("det_b");
  honu::write_outputs(honu::run_experiment(c), a);
  honu::write_outputs(honu::run_experiment(c), b);
  for (const char* f : {"trace.csv", "summary.json", "weights.csv", "series.csv"}) {
    const std::string x = slurp(a / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(b / f)) << f;
  }
  c.seed = 2;
  const auto d = scratch("det_d");
  honu::write_outputs(honu::run_experiment(c), d);
  EXPECT_NE(slurp(a / "series.csv"), slurp(d / "series.csv"));
}

TEST(Experiment, GoldenTrace) {
  // Pinned config; regenerate tests/golden/ only on a deliberate schema change.
  const auto c = honu::load_config(HONU_SOURCE_DIR "/tests/golden/pinned.cfg");
  std::ostringstream os;
  honu::write_trace_csv(os, honu::run_experiment(c).training.trace);
  const std::string golden = slurp(HONU_SOURCE_DIR "/tests/golden/pinned_trace.csv");
  ASSERT_FALSE(golden.empty());
  EXPECT_EQ(os.str(), golden);
}

TEST(Experiment, NarendraLsmTrueErrorBelowNoisyError) {
  const auto c = honu::load_config(HONU_SOURCE_DIR "/configs/narendra_lsm.cfg");
  const auto r = honu::run_experiment(c);
  ASSERT_TRUE(r.test_error.mae_true.has_value());
  EXPECT_GT(r.test_error.mae, *r.test_error.mae_true);
  EXPECT_NEAR(r.data.snr_db, 4.83, 0.5);
  EXPECT_EQ(r.test_count, 700u);
}

TEST(Experiment, RecurrentRunIsFiniteAndCounted) {
  auto c = honu::parse_config_text(
      "task = mackey-glass\ntrainer = rtrl\norder = 2\nhorizon = 3\nfeedback_taps = 2\n"
      "external_taps = 2\nmu = 0.01\nepochs = 2\ntrain = 40\ntest = 15\n");
  const auto r = honu::run_experiment(c);
  ASSERT_EQ(r.training.status, honu::RunStatus::ok);
  EXPECT_EQ(r.training.trace.size(), 80u);
  EXPECT_EQ(r.test_count, 15u);
  EXPECT_TRUE(std::isfinite(r.test_error.mae));
}

TEST(Describe, MonomialTables) {
  std::ostringstream os;
  honu::describe(honu::parse_config_text("task = mackey-glass\ninputs = 2\norder = 2\n"), os);
  const std::string t = os.str();
  EXPECT_NE(t.find("weights n_w = 6\n"), std::string::npos);
  EXPECT_NE(t.find("q,monomial\n0,1\n1,x1\n2,x2\n3,x1*x1\n4,x1*x2\n5,x2*x2\n"), std::string::npos);

  std::ostringstream big;
  honu::describe(honu::parse_config_text(
                     "trainer = rtrl\nfeedback_taps = 10\nexternal_taps = 7\norder = 2\n"),
                 big);
  EXPECT_NE(big.str().find("weights n_w = 171\n"), std::string::npos);

  std::ostringstream lin;
  honu::describe(honu::parse_config_text("order = 1\n"), lin);
  EXPECT_NE(lin.str().find("linear filter"), std::string::npos);
}

TEST(Sweep, HalvingAlphaRaisesMuWithinBounds) {
  auto c = honu::parse_config_text(
      "sweep_inputs = 10\nsweep_orders = 2\nsweep_alphas = 0.5, 1\nsweep_batch = 200\n");
  const auto s = honu::sweep_scaling(c);
  ASSERT_EQ(s.points.size(), 2u);
  const double ratio = s.points[0].mu_star / s.points[1].mu_star;
  EXPECT_GE(ratio, 4.0);
  EXPECT_LE(ratio, 16.0);
  for (const auto& p : s.points) EXPECT_NEAR(p.rho, 1.001, 1e-6);
}

TEST(Sweep, ZeroMuAndMonotoneInInputs) {
  auto c = honu::parse_config_text(
      "sweep_inputs = 2, 5, 10\nsweep_orders = 2\nsweep_alphas = 0.3, 1\nsweep_batch = 100\n");
  const auto s = honu::sweep_scaling(c);
  for (const auto& p : s.curve) EXPECT_TRUE(p.mu != 0.0 || p.rho == 1.0) << p.n;
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t i = 1; i < 3; ++i)
      EXPECT_LE(s.points[2 * i + a].mu_star, s.points[2 * (i - 1) + a].mu_star * (1 + 1e-6));
}

TEST(Sweep, FitSlopeAndBracketFailure) {
  const std::vector<double> x{0, 1, 2}, y{1, -1, -3};
  EXPECT_DOUBLE_EQ(honu::fit_slope(x, y), -2.0);
  honu::Vector bias_only(1);
  bias_only << 1.0;
  // Radius max(1, |1 - mu|) never reaches 1.001 below mu = 2.001; still bracketed.
  EXPECT_NEAR(honu::bisect_mu({bias_only}, 1.001), 2.001, 1e-6);
  EXPECT_THROW(honu::bisect_mu({honu::Vector::Zero(3)}, 1.001), honu::ConvergenceError);
}

class Cli : public ::testing::Test {
 protected:
  int run(const std::string& args) {
    const std::string cmd = std::string(HONU_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  fs::path write_cfg(const std::string& name, const std::string& text) {
    const fs::path p = scratch("cfg_" + name) / name;
    std::ofstream(p) << text;
    return p;
  }
};

TEST_F(Cli, SuccessWritesAllOutputs) {
  const auto out = scratch("cli_ok");
  ASSERT_EQ(run("train --config " HONU_SOURCE_DIR "/configs/narendra_lsm.cfg --out " +
                out.string()),
            0);
  for (const char* f : {"trace.csv", "summary.json", "weights.csv", "series.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(summary.at("schema"), "honu-summary/1");
  EXPECT_EQ(run("describe --config " HONU_SOURCE_DIR "/configs/narendra_lsm.cfg"), 0);
  EXPECT_EQ(run("generate --config " HONU_SOURCE_DIR "/configs/narendra_lsm.cfg --out " +
                out.string()),
            0);
}

TEST_F(Cli, SeedFlagOverridesConfig) {
  const auto a = scratch("cli_seed_a"), b = scratch("cli_seed_b");
  const std::string cfg = "--config " HONU_SOURCE_DIR "/configs/narendra_lsm.cfg";
  ASSERT_EQ(run("generate " + cfg + " --seed 5 --out " + a.string()), 0);
  ASSERT_EQ(run("generate " + cfg + " --seed 6 --out " + b.string()), 0);
  EXPECT_NE(slurp(a / "series.csv"), slurp(b / "series.csv"));
}

TEST_F(Cli, ConfigErrorExitsTwo) {
  EXPECT_EQ(run("train --config " + write_cfg("bad.cfg", "order = banana\n").string() +
                " --out " + scratch("cli_bad").string()),
            2);
  EXPECT_EQ(run("train --config /nonexistent/x.cfg"), 2);
  EXPECT_EQ(run("train --bogus-flag"), 2);
}

TEST_F(Cli, NumericAbortExitsThree) {
  const auto cfg = write_cfg("blowup.cfg",
                             "trainer = gd\norder = 3\nscheme = fixed\nmu = 50\nepochs = 5\n");
  EXPECT_EQ(run("train --config " + cfg.string() + " --out " + scratch("cli_abort").string()), 3);
}

}  // namespace
