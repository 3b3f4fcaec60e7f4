#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "honu/adaptive_lr.hpp"
#include "honu/polyops.hpp"
#include "honu/stability.hpp"

namespace {

using honu::Matrix;
using honu::NormalizedVariant;
using honu::Rates;
using honu::Vector;

Vector random_expansion(std::mt19937_64& rng, std::size_t n, std::size_t r) {
  std::normal_distribution<double> g;
  Vector x(static_cast<Eigen::Index>(n + 1));
  x[0] = 1.0;
  for (Eigen::Index i = 1; i < x.size(); ++i) x[i] = g(rng);
  return honu::MonomialBasis(n, r).expand(x);
}

const NormalizedVariant all_variants[] = {NormalizedVariant::norm, NormalizedVariant::squared_norm,
                                          NormalizedVariant::frobenius, NormalizedVariant::row_norm,
                                          NormalizedVariant::row_squared_norm};

TEST(NormalizedRate, SquaredNormHandValue) {
  Vector x(4);
  x << 1, 1, 1, 1;  // ||x||^2 = 4
  EXPECT_EQ(std::get<double>(honu::normalized_rate(NormalizedVariant::squared_norm, x, 1.0, 0.0)),
            0.25);
  EXPECT_EQ(std::get<double>(honu::normalized_rate(NormalizedVariant::norm, x, 1.0, 0.0)), 0.5);
}

TEST(NormalizedRate, MatrixVariantsOnIdentity) {
  const Matrix a = Matrix::Identity(4, 4);
  EXPECT_EQ(std::get<double>(honu::normalized_rate(NormalizedVariant::frobenius, a, 1.0, 0.0)),
            0.25);
  const Rates rows = honu::normalized_rate(NormalizedVariant::row_squared_norm, a, 0.8, 1.0);
  EXPECT_TRUE(std::get<honu::RateDiagonal>(rows).values().isApproxToConstant(0.4));
  EXPECT_THROW(honu::normalized_rate(NormalizedVariant::norm, a, 1.0, 0.0), std::invalid_argument);
}

TEST(NormalizedRate, ClosedFormRowsMatchExplicitMatrix) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector colx = random_expansion(rng, 3, 2);
    Vector m(colx.size());
    for (auto& v : m) v = u(rng);
    const Rates base = honu::RateDiagonal(m);
    const Matrix a = honu::update_matrix_static(base, colx);
    for (auto v : {NormalizedVariant::frobenius, NormalizedVariant::row_norm,
                   NormalizedVariant::row_squared_norm}) {
      const Vector closed = honu::rate_vector(honu::normalized_rate(v, colx, base, 1.0), colx.size());
      const Vector dense = honu::rate_vector(honu::normalized_rate(v, a, base, 1.0), colx.size());
      EXPECT_TRUE(closed.isApprox(dense, 1e-10));
    }
  }
}

TEST(NormalizedRate, StrictlyPositiveWhenMuPositive) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector colx = random_expansion(rng, 1 + trial % 4, 1 + trial % 3);
    for (auto v : all_variants) {
      for (double eps : {0.0, 1.0}) {
        const Vector eta =
            honu::rate_vector(honu::normalized_rate(v, colx, 0.3, eps), colx.size());
        EXPECT_TRUE((eta.array() > 0.0).all());
        EXPECT_TRUE(eta.allFinite());
      }
    }
  }
}

TEST(NormalizedRate, SquaredNormRadiusIsOneMinusMu) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector colx = 10.0 * random_expansion(rng, 4, 3);  // input magnitude is irrelevant
    const double mu = 3.0 * (trial + 1) / 200.0;
    const Rates eta = honu::normalized_rate(NormalizedVariant::squared_norm, colx, mu, 0.0);
    EXPECT_NEAR(honu::static_radius_closed_form(eta, colx), std::max(1.0, std::abs(1.0 - mu)),
                1e-12);
  }
}

TEST(NormalizedRate, RowSquaredNormKeepsStaticRadiusBounded) {
  // With mu_q = 1 and eps = 1 the gain rowx M colx stays in (0, 2] while the
  // unit is small (n_w <= 20 here), so rho(I - M S) <= 1 with no slack.
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector colx = random_expansion(rng, 1 + trial % 3, 1 + (trial / 3) % 3);
    const Rates eta = honu::normalized_rate(NormalizedVariant::row_squared_norm, colx,
                                            honu::RateDiagonal::uniform(colx.size(), 1.0), 1.0);
    worst = std::max(worst, honu::static_radius_closed_form(eta, colx));
  }
  EXPECT_LE(worst, 1.0 + 1e-12);
}

TEST(GradientAdaptive, MathewsHandValue) {
  Vector a(1), b(1);
  a << 0.5;
  b << 1.0;
  EXPECT_DOUBLE_EQ(honu::mathews_rate(0.1, 0.01, 1.0, 2.0, a, b), 0.11);

  honu::LrState st;
  st.mu = 0.1;
  st.beta = 0.01;
  honu::gradient_adaptive_rate(honu::GradientVariant::mathews, st, 2.0, b);
  EXPECT_EQ(st.mu, 0.1);  // no history yet
  honu::gradient_adaptive_rate(honu::GradientVariant::mathews, st, 1.0, a);
  EXPECT_DOUBLE_EQ(st.mu, 0.11);
}

TEST(GradientAdaptive, ZeroErrorNeverMovesMu) {
  std::mt19937_64 rng(5);
  for (auto v : {honu::GradientVariant::benveniste, honu::GradientVariant::farhang_ang,
                 honu::GradientVariant::mathews}) {
    honu::LrState st;
    st.mu = 0.05;
    for (int k = 0; k < 20; ++k) honu::gradient_adaptive_rate(v, st, 0.0, random_expansion(rng, 2, 2));
    EXPECT_EQ(st.mu, 0.05);
  }
}

TEST(GradientAdaptive, BenvenisteAndFarhangAngAgreeOnFirstUpdate) {
  std::mt19937_64 rng(6);
  const Vector x0 = random_expansion(rng, 2, 2), x1 = random_expansion(rng, 2, 2);
  honu::LrState b, f;
  b.mu = f.mu = 0.02;
  b.beta = f.beta = 0.01;
  f.forgetting = 0.5;
  honu::gradient_adaptive_rate(honu::GradientVariant::benveniste, b, 0.7, x0);
  honu::gradient_adaptive_rate(honu::GradientVariant::farhang_ang, f, 0.7, x0);
  EXPECT_EQ(b.mu, 0.02);
  honu::gradient_adaptive_rate(honu::GradientVariant::benveniste, b, -0.3, x1);
  honu::gradient_adaptive_rate(honu::GradientVariant::farhang_ang, f, -0.3, x1);
  EXPECT_EQ(b.gamma, f.gamma);
  EXPECT_DOUBLE_EQ(b.mu, f.mu);
  EXPECT_DOUBLE_EQ(b.mu, 0.02 + 0.01 * -0.3 * 0.7 * x0.dot(x1));
}

TEST(GradientAdaptive, MuStaysNonNegative) {
  Vector x(2);
  x << 1, 1;
  honu::LrState st;
  st.mu = 0.001;
  st.beta = 1.0;
  honu::gradient_adaptive_rate(honu::GradientVariant::mathews, st, 5.0, x);
  honu::gradient_adaptive_rate(honu::GradientVariant::mathews, st, -5.0, x);
  EXPECT_EQ(st.mu, 0.0);
}

TEST(Regularizer, GngdHandValue) {
  Vector prev(2), cur(2);
  prev << 1, 1;  // ||prev||^2 = 2
  cur << 1, 1;   // cur . prev = 2
  EXPECT_NEAR(honu::gngd_epsilon(1.0, 0.1, 0.5, 1.0, 1.0, cur, prev), 1.0 - 0.1 * 0.5 * 2 / 9,
              1e-15);
  EXPECT_NEAR(honu::gngd_epsilon(1.0, 0.1, 0.5, 1.0, 1.0, cur, prev), 0.98889, 1e-5);
}

TEST(Regularizer, RrNlmsClamp) {
  Vector x(1);
  x << 1;
  EXPECT_EQ(honu::rr_nlms_epsilon(0.5, 0.1, 1.0, 1.0, 1.0, x, x), 0.1);
  EXPECT_EQ(honu::rr_nlms_epsilon(0.5, 0.1, 0.2, -1.0, 1.0, x, x), 0.7);
}

TEST(Regularizer, ZeroErrorLeavesEpsilon) {
  std::mt19937_64 rng(7);
  for (auto v : {honu::RegularizerVariant::gngd, honu::RegularizerVariant::rr_nlms}) {
    honu::LrState st;
    st.epsilon = 0.8;
    for (int k = 0; k < 10; ++k) honu::regularizer_update(v, st, 0.0, random_expansion(rng, 2, 2));
    EXPECT_EQ(st.epsilon, 0.8);
  }
}

TEST(Regularizer, EpsilonNeverNegative) {
  Vector x(2);
  x << 0.1, 0.1;
  honu::LrState g, r;
  g.epsilon = r.epsilon = 0.01;
  g.beta = r.beta = 10.0;
  r.epsilon_min = 1e-4;
  for (int k = 0; k < 10; ++k) {
    honu::regularizer_update(honu::RegularizerVariant::gngd, g, 3.0, x);
    honu::regularizer_update(honu::RegularizerVariant::rr_nlms, r, 3.0, x);
    EXPECT_GE(g.epsilon, 0.0);
    EXPECT_GE(r.epsilon, r.epsilon_min);
  }
}

TEST(Scheme, NamesRoundTrip) {
  for (const auto& [kind, name] : honu::scheme_names) {
    ASSERT_TRUE(honu::parse_scheme(name).has_value());
    EXPECT_EQ(*honu::parse_scheme(name), kind);
    EXPECT_EQ(honu::to_string(kind), name);
  }
  EXPECT_FALSE(honu::parse_scheme("nlms").has_value());
}

TEST(Scheme, GngdUsesItsRegularizer) {
  honu::LrState st;
  st.mu = 1.0;
  st.epsilon = 2.0;
  honu::LearningRateScheme s(honu::SchemeKind::gngd, st);
  Vector x(2);
  x << 1, 1;
  EXPECT_EQ(std::get<double>(s.rates_for(x)), 0.25);
  s.scale_base(0.5);
  EXPECT_EQ(std::get<double>(s.rates_for(x)), 0.125);
}

}  // namespace
