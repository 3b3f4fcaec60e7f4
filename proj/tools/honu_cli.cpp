// honu: command-line experiment runner.
//
//   honu generate      --config c.cfg [--seed S] --out dir   -> dir/series.csv
//   honu describe      --config c.cfg                        -> monomial table
//   honu train         --config c.cfg [--seed S] --out dir [--trace-every K]
//   honu sweep-scaling --config c.cfg [--seed S] --out dir
//
// Exit codes: 0 success, 2 configuration error, 3 numeric abort.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "honu/honu.hpp"

namespace {

constexpr int exit_config = 2;
constexpr int exit_numeric = 3;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::size_t> trace_every;
};

honu::ExperimentConfig load(const Common& o) {
  honu::ExperimentConfig c = o.config_path.empty() ? honu::ExperimentConfig{}
                                                    : honu::load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.trace_every) c.trace_every = *o.trace_every;
  c.validate();
  return c;
}

int cmd_generate(const Common& o) {
  const auto c = load(o);
  const auto data = honu::generate_data(c);
  std::filesystem::create_directories(o.out);
  honu::save_series_csv((std::filesystem::path(o.out) / "series.csv").string(), data.series);
  std::cout << "wrote " << data.series.size() << " samples to "
            << (std::filesystem::path(o.out) / "series.csv").string() << '\n';
  return 0;
}

int cmd_describe(const Common& o) {
  honu::describe(load(o), std::cout);
  return 0;
}

int cmd_train(const Common& o) {
  const auto c = load(o);
  const auto res = honu::run_experiment(c);
  honu::write_outputs(res, o.out);
  const auto& s = res.training;
  std::cout << "status " << honu::to_string(s.status) << ", " << s.trace.size() << " steps, "
            << "train MAE " << honu::format_double(res.train_error.mae) << ", test MAE "
            << honu::format_double(res.test_error.mae);
  if (res.test_error.mae_true)
    std::cout << " (vs true signal " << honu::format_double(*res.test_error.mae_true) << ")";
  std::cout << '\n';
  if (s.status == honu::RunStatus::numeric_abort) {
    std::cerr << "numeric abort: " << s.abort_reason << '\n';
    if (s.last_record) {
      std::cerr << honu::stability_csv_header << '\n';
      honu::write_stability_row(std::cerr, *s.last_record);
    }
    return exit_numeric;
  }
  return 0;
}

int cmd_sweep(const Common& o) {
  const auto c = load(o);
  const auto res = honu::sweep_scaling(c);
  const std::filesystem::path dir(o.out);
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "sweep.csv", std::ios::binary);
    honu::write_sweep_csv(os, res);
  }
  {
    std::ofstream os(dir / "radius_curve.csv", std::ios::binary);
    honu::write_radius_curve_csv(os, res);
  }
  std::cout << "n,r,slope\n";
  for (const auto& s : res.slopes)
    std::cout << s.n << ',' << s.r << ',' << honu::format_double(s.slope) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Higher-order neural unit experiments"};
  app.require_subcommand(1);
  Common opts;

  auto add_common = [&](CLI::App* sub, bool with_out) {
    sub->add_option("--config", opts.config_path, "Config file (key = value lines)");
    sub->add_option("--seed", opts.seed, "Override the config seed");
    if (with_out) sub->add_option("--out", opts.out, "Output directory")->capture_default_str();
  };
  auto* gen = app.add_subcommand("generate", "Write the configured data series");
  add_common(gen, true);
  auto* desc = app.add_subcommand("describe", "Print the monomial table and dimensions");
  add_common(desc, false);
  auto* train = app.add_subcommand("train", "Run the configured experiment");
  add_common(train, true);
  train->add_option("--trace-every", opts.trace_every,
                    "Evaluate stability radii every K steps (0 = never)");
  auto* sweep = app.add_subcommand("sweep-scaling", "Learning rate vs input scaling sweep");
  add_common(sweep, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  try {
    if (gen->parsed()) return cmd_generate(opts);
    if (desc->parsed()) return cmd_describe(opts);
    if (train->parsed()) return cmd_train(opts);
    if (sweep->parsed()) return cmd_sweep(opts);
  } catch (const honu::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const honu::NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << '\n';
    return exit_numeric;
  } catch (const honu::SingularSystemError& e) {
    std::cerr << "numeric abort: " << e.what() << '\n';
    return exit_numeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
