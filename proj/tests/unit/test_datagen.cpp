#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "honu/datagen.hpp"

namespace {

using honu::AugmentedInput;
using honu::MackeyGlassParams;
using honu::NoiseSpec;

TEST(Narendra, FollowsPlantEquation) {
  auto s = honu::narendra_series(500, 1, 2, NoiseSpec::with_variance(1.0));
  EXPECT_EQ(s.y_true[0], 0.0);
  for (std::size_t k = 0; k + 1 < s.y_true.size(); ++k) {
    const double y = s.y_true[k];
    EXPECT_EQ(s.y_true[k + 1], y / (1 + y * y) + s.u[k] * s.u[k] * s.u[k]);
  }
  for (std::size_t k = 0; k < s.y_p.size(); ++k) EXPECT_EQ(s.y_p[k], s.y_true[k] + s.noise[k]);
}

TEST(Narendra, FirstStepFromUnitInput) {
  // y_true(1) = 0 / (1 + 0) + u(0)^3; with u(0) = 1 that is 1.
  const double y0 = 0.0, u0 = 1.0;
  EXPECT_EQ(y0 / (1 + y0 * y0) + u0 * u0 * u0, 1.0);
  auto s = honu::narendra_series(2, 9, 9, NoiseSpec::with_variance(0.0));
  EXPECT_EQ(s.y_true[1], s.u[0] * s.u[0] * s.u[0]);
}

TEST(Narendra, ZeroNoiseGivesInfiniteSnr) {
  auto s = honu::narendra_series(100, 3, 4, NoiseSpec::with_variance(0.0));
  EXPECT_EQ(s.y_p, s.y_true);
  EXPECT_TRUE(std::isinf(s.snr_db));
  EXPECT_GT(s.snr_db, 0.0);
}

TEST(Narendra, HitsRequestedSnr) {
  auto s = honu::narendra_series(1002, 5, 6, NoiseSpec::with_snr(4.83));
  EXPECT_NEAR(s.snr_db, 4.83, 0.3);
  auto big = honu::narendra_series(100000, 5, 6, NoiseSpec::with_snr(4.83));
  EXPECT_NEAR(big.snr_db, 4.83, 0.05);
}

TEST(Narendra, InputAndNoiseUncorrelated) {
  auto s = honu::narendra_series(20000, 7, 8, NoiseSpec::with_variance(1.0));
  double cross = 0.0, pu = 0.0, pe = 0.0;
  for (std::size_t k = 0; k < s.u.size(); ++k) {
    cross += s.u[k] * s.noise[k];
    pu += s.u[k] * s.u[k];
    pe += s.noise[k] * s.noise[k];
  }
  EXPECT_LT(std::abs(cross / std::sqrt(pu * pe)), 0.1);
}

TEST(Narendra, BitReproducible) {
  auto a = honu::narendra_series(300, 11, 12, NoiseSpec::with_snr(3.0));
  auto b = honu::narendra_series(300, 11, 12, NoiseSpec::with_snr(3.0));
  EXPECT_EQ(a.y_p, b.y_p);
  EXPECT_EQ(a.u, b.u);
  auto c = honu::narendra_series(300, 11, 13, NoiseSpec::with_snr(3.0));
  EXPECT_NE(a.y_p, c.y_p);
  EXPECT_EQ(a.y_true, c.y_true);
}

TEST(Narendra, RejectsBadArguments) {
  EXPECT_THROW(honu::narendra_series(1, 1, 1, NoiseSpec::with_variance(1)), std::invalid_argument);
  EXPECT_THROW(honu::narendra_series(10, 1, 1, NoiseSpec{}), std::invalid_argument);
  EXPECT_THROW(honu::narendra_series(10, 1, 1, NoiseSpec::with_snr(INFINITY)),
               std::invalid_argument);
}

TEST(Snr, HandValues) {
  const std::vector<double> two(10, 2.0), one(10, 1.0), root(10, std::sqrt(3.04));
  EXPECT_NEAR(honu::snr_db(two, one), 6.0206, 1e-4);
  EXPECT_EQ(honu::snr_db(one, one), 0.0);
  EXPECT_NEAR(honu::snr_db(root, one), 4.83, 1e-2);
  const std::vector<double> zero(10, 0.0);
  EXPECT_TRUE(std::isinf(honu::snr_db(one, zero)));
}

TEST(Snr, SignalAgainstItselfIsExactlyZero) {
  auto s = honu::narendra_series(100, 1, 2, NoiseSpec::with_variance(1.0));
  EXPECT_EQ(honu::snr_db(s.y_true, s.y_true), 0.0);
}

TEST(MackeyGlass, FixedPointStaysPut) {
  for (double c : {1.0, 10.0}) {
    MackeyGlassParams p;
    p.length = 100;
    p.history = 1.0;
    p.exponent = c;
    for (double v : honu::mackey_glass(p).samples) EXPECT_NEAR(v, 1.0, 1e-14);
  }
}

TEST(MackeyGlass, ExponentialDecayWithoutFeedback) {
  MackeyGlassParams p;
  p.length = 11;
  p.a = 0.0;
  p.history = 1.3;
  const auto s = honu::mackey_glass(p);
  EXPECT_NEAR(s.samples[10], 1.3 * std::exp(-0.1 * 10.0), 1e-6);
}

TEST(MackeyGlass, ChaoticRegimeBoundedAndAperiodic) {
  MackeyGlassParams p;
  p.length = 2000;
  p.transient = 500;
  const auto s = honu::mackey_glass(p);
  ASSERT_EQ(s.size(), 2000u);
  double lo = 10, hi = -10;
  for (double v : s.samples) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GT(lo, 0.2);
  EXPECT_LT(hi, 1.4);
  EXPECT_GT(hi - lo, 0.5);
  // No exact repetition at any lag up to 500.
  for (std::size_t lag = 1; lag <= 500; ++lag) {
    double diff = 0.0;
    for (std::size_t i = 0; i + lag < s.size(); ++i)
      diff = std::max(diff, std::abs(s.samples[i + lag] - s.samples[i]));
    EXPECT_GT(diff, 1e-3) << lag;
  }
}

TEST(MackeyGlass, FourthOrderConvergence) {
  auto at50 = [](double step) {
    MackeyGlassParams p;
    p.length = 51;
    p.step = step;
    return honu::mackey_glass(p).samples[50];
  };
  const double h = 0.1;
  const double ref = at50(h / 8);
  const double ratio = std::abs(at50(h) - ref) / std::abs(at50(h / 2) - ref);
  EXPECT_GT(ratio, 12.0);
  EXPECT_LT(ratio, 20.0);
}

TEST(MackeyGlass, RejectsBadSteps) {
  MackeyGlassParams p;
  p.step = 0.3;  // 1 s is not a multiple
  EXPECT_THROW(honu::mackey_glass(p), std::invalid_argument);
  p.step = 0.1;
  p.tau = 0.0;
  EXPECT_THROW(honu::mackey_glass(p), std::invalid_argument);
}

TEST(ScaleInputs, BiasUntouched) {
  auto x = AugmentedInput::from_raw(std::vector<double>{2, 4});
  EXPECT_EQ(honu::scale_inputs(x, 1.0).values(), x.values());
  const auto half = honu::scale_inputs(x, 0.5).values();
  EXPECT_EQ(half[0], 1.0);
  EXPECT_EQ(half[1], 1.0);
  EXPECT_EQ(half[2], 2.0);
  EXPECT_THROW(honu::scale_inputs(x, 0.0), std::invalid_argument);
}

TEST(ScaleInputs, MixedMonomialScalesByAlphaSquared) {
  auto x = AugmentedInput::from_raw(std::vector<double>{1.5, -0.7});
  const auto base = honu::row_expand(x, 2);
  const auto scaled = honu::row_expand(honu::scale_inputs(x, 0.5), 2);
  EXPECT_DOUBLE_EQ(scaled[4], 0.25 * base[4]);  // monomial (1, 2)
  EXPECT_DOUBLE_EQ(scaled[1], 0.5 * base[1]);   // monomial (0, 1)
  EXPECT_EQ(scaled[0], base[0]);
}

TEST(SupervisedWindows, HandWindowing) {
  const std::vector<double> s{1, 2, 3, 4};
  auto t = honu::make_supervised_windows(s, 2, 1);
  ASSERT_EQ(t.size(), 2);
  honu::Matrix expected(2, 3);
  expected << 1, 2, 1, 1, 3, 2;
  EXPECT_EQ(t.patterns(), expected);
  EXPECT_EQ(t.targets()[0], 3.0);
  EXPECT_EQ(t.targets()[1], 4.0);
}

TEST(SupervisedWindows, CountAndPreconditions) {
  std::vector<double> s(30);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i);
  for (std::size_t d = 1; d <= 5; ++d)
    for (std::size_t h = 1; h <= 5; ++h) {
      auto t = honu::make_supervised_windows(s, d, h);
      EXPECT_EQ(static_cast<std::size_t>(t.size()), s.size() - d - h + 1);
      EXPECT_EQ(t.targets()[0], static_cast<double>(d - 1 + h));
    }
  EXPECT_THROW(honu::make_supervised_windows(s, 2, 0), std::invalid_argument);
  EXPECT_THROW(honu::make_supervised_windows(std::vector<double>{1, 2}, 2, 1),
               std::invalid_argument);
}

}  // namespace
