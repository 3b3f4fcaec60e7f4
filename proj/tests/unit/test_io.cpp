#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "honu/datagen.hpp"
#include "honu/io.hpp"
#include "honu/recurrent_unit.hpp"

namespace {

using honu::Vector;

TEST(SeriesCsv, BitExactRoundTrip) {
  honu::MackeyGlassParams p;
  p.length = 300;
  p.transient = 100;
  honu::TimeSeries s = honu::mackey_glass(p);
  s.seed = 12345678901234567ull;
  s.samples.push_back(1e-300);
  s.samples.push_back(-0.1);
  std::stringstream ss;
  honu::write_series_csv(ss, s);
  const honu::TimeSeries back = honu::read_series_csv(ss);
  EXPECT_EQ(back, s);
  for (std::size_t i = 0; i < s.size(); ++i)
    EXPECT_EQ(std::memcmp(&back.samples[i], &s.samples[i], sizeof(double)), 0);
}

TEST(SeriesCsv, HeaderCarriesProvenance) {
  honu::TimeSeries s;
  s.generator = "narendra";
  s.seed = 7;
  s.parameters = {{"snr_db", "4.83"}};
  s.samples = {0.5, 1.25};
  std::ostringstream os;
  honu::write_series_csv(os, s);
  EXPECT_EQ(os.str(), "# generator=narendra\n# seed=7\n# dt=1\n# snr_db=4.83\nvalue\n0.5\n1.25\n");
}

TEST(SeriesCsv, RejectsGarbage) {
  std::istringstream no_header("1\n2\n");
  EXPECT_THROW(honu::read_series_csv(no_header), honu::FormatError);
  std::istringstream bad("value\n1\nabc\n");
  EXPECT_THROW(honu::read_series_csv(bad), std::exception);
  std::istringstream crlf("# generator=x\r\nvalue\r\n2\r\n");
  EXPECT_EQ(honu::read_series_csv(crlf).samples, std::vector<double>{2.0});
}

TEST(WeightsCsv, RoundTripAndLayout) {
  auto w = honu::WeightVector::random(honu::make_basis(2, 2), 3, 1.0);
  std::stringstream ss;
  honu::write_weights_csv(ss, w);
  const std::string text = ss.str();
  EXPECT_NE(text.find("q,monomial,weight\n0,0.0,"), std::string::npos);
  EXPECT_NE(text.find("\n4,1.2,"), std::string::npos);
  const auto back = honu::read_weights_csv(ss);
  EXPECT_EQ(back.values, w.values);
  EXPECT_EQ(back.inputs(), 2u);
  EXPECT_EQ(back.order(), 2u);
}

TEST(WeightsCsv, RejectsWrongOrderHash) {
  auto w = honu::WeightVector::zeros(honu::make_basis(3, 2));
  std::ostringstream os;
  honu::write_weights_csv(os, w);
  std::string text = os.str();
  const auto pos = text.find("order_hash=") + 11;
  text[pos] = text[pos] == '0' ? '1' : '0';
  std::istringstream is(text);
  EXPECT_THROW(honu::read_weights_csv(is), honu::FormatError);
}

TEST(WeightsCsv, RejectsMissingOrShuffledRows) {
  auto w = honu::WeightVector::random(honu::make_basis(1, 2), 4, 1.0);
  std::ostringstream os;
  honu::write_weights_csv(os, w);
  std::string text = os.str();
  std::istringstream truncated(text.substr(0, text.rfind('\n', text.size() - 2) + 1));
  EXPECT_THROW(honu::read_weights_csv(truncated), honu::FormatError);

  const auto r1 = text.find("\n1,"), r2 = text.find("\n2,");
  std::string swapped = text.substr(0, r1) + text.substr(r2, text.size() - r2 - 1) +
                        text.substr(r1, r2 - r1) + "\n";
  std::istringstream is(swapped);
  EXPECT_THROW(honu::read_weights_csv(is), honu::FormatError);
}

TEST(WeightsJson, RoundTrip) {
  auto w = honu::WeightVector::random(honu::make_basis(4, 3), 5, 2.0);
  const auto back = honu::weights_from_json(nlohmann::json::parse(honu::weights_to_json(w).dump()));
  EXPECT_EQ(back.values, w.values);
  auto j = honu::weights_to_json(w);
  j["order_hash"] = "0000000000000000";
  EXPECT_THROW(honu::weights_from_json(j), honu::FormatError);
}

TEST(StateJson, SnapshotResumesIdentically) {
  honu::RecurrentConfig cfg{2, 1, 1, 2, false};
  honu::RecurrentState st(cfg, honu::WeightVector::random(honu::make_basis(3, 2), 6, 0.2));
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  st.push_feedback(0.3);
  st.push_feedback(-0.2);
  st.push_external(0.5);
  for (int k = 0; k < 10; ++k) honu::rtrl_step(st, g(rng), g(rng), 0.01);

  honu::RecurrentState copy =
      honu::state_from_json(nlohmann::json::parse(honu::state_to_json(st).dump()));
  EXPECT_EQ(copy.weights.values, st.weights.values);
  EXPECT_EQ(copy.sensitivities, st.sensitivities);
  EXPECT_EQ(copy.feedback, st.feedback);
  EXPECT_EQ(copy.external, st.external);
  EXPECT_EQ(copy.feedback_filled, st.feedback_filled);

  for (int k = 0; k < 10; ++k) {
    const double t = g(rng), u = g(rng);
    const auto a = honu::rtrl_step(st, t, u, 0.01);
    const auto b = honu::rtrl_step(copy, t, u, 0.01);
    EXPECT_EQ(a.step.prediction, b.step.prediction);
    EXPECT_EQ(a.step.rho, b.step.rho);
  }
  EXPECT_EQ(copy.weights.values, st.weights.values);
}

TEST(StateJson, RejectsMismatchedShapes) {
  honu::RecurrentState st(honu::RecurrentConfig{2, 0, 1, 2, false});
  auto j = honu::state_to_json(st);
  j["feedback"] = std::vector<double>{1.0};
  EXPECT_THROW(honu::state_from_json(j), honu::FormatError);
  j = honu::state_to_json(st);
  j["format"] = "other";
  EXPECT_THROW(honu::state_from_json(j), honu::FormatError);
}

TEST(TraceCsv, SchemaAndEmptyRadiusColumns) {
  std::vector<honu::TraceRow> rows(2);
  rows[0] = {0, 1, 0.5, 1.0, 0.5, 0.01, {0, 1.0, 2.0, honu::StabilityMode::static_unit,
                                         honu::GuardAction::none}};
  rows[1] = {1, 1, 0.25, 0.0, -0.25, 0.01, {}};
  std::ostringstream os;
  honu::write_trace_csv(os, rows);
  const std::string text = os.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "# schema=honu-trace/1");
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  std::getline(is, line);
  EXPECT_EQ(line, honu::trace_csv_header);
  std::getline(is, line);
  EXPECT_EQ(line, "0,1,0.5,1,0.5,0.01,1,2,static,none");
  std::getline(is, line);
  EXPECT_EQ(line.substr(0, 24), "1,1,0.25,0,-0.25,0.01,,,");
}

}  // namespace
