// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include <gtest/gtest.h>

#include <random>

#include "aeskd/errors.hpp"
#include "aeskd/losses.hpp"
#include "oracles.hpp"

using namespace aeskd;

namespace {

ScoreDistribution dist(const std::vector<double>& p) { return ScoreDistribution(p, default_bin_values(p.size())); }

}  // namespace

TEST(EmdLoss, MatchesNaiveCdfOracle) {
  std::mt19937_64 gen(11);
  for (std::size_t d : {2u, 5u, 10u}) {
    for (double r : {1.0, 2.0, 3.0}) {
      for (int t = 0; t < 200; ++t) {
        const auto p = testutil::random_simplex(d, gen);
        const auto q = testutil::random_simplex(d, gen);
        EXPECT_NEAR(emd_loss(dist(p), dist(q), {r, d}), oracle::emd(p, q, r), 1e-12);
      }
    }
  }
}

TEST(EmdLoss, FrozenValues) {
  // Hand-computed: CDF differences (0.5, 0) over d = 2.
  EXPECT_NEAR(emd_loss(dist({1.0, 0.0}), dist({0.5, 0.5}), {2.0, 2}), std::sqrt(0.125), 1e-15);
  // One-hot at bin 1 vs bin 10: nine unit CDF gaps out of ten.
  const auto a = ScoreDistribution::one_hot(0, default_bin_values());
  const auto b = ScoreDistribution::one_hot(9, default_bin_values());
  EXPECT_NEAR(emd_loss(a, b, {1.0, 10}), 0.9, 1e-15);
  EXPECT_NEAR(emd_loss(a, b, {2.0, 10}), std::sqrt(0.9), 1e-15);
}

TEST(EmdLoss, Properties) {
  std::mt19937_64 gen(12);
  for (int t = 0; t < 200; ++t) {
    const auto p = dist(testutil::random_simplex(10, gen));
    const auto q = dist(testutil::random_simplex(10, gen));
    const auto s = dist(testutil::random_simplex(10, gen));
    EXPECT_EQ(emd_loss(p, p), 0.0);
    EXPECT_NEAR(emd_loss(p, q), emd_loss(q, p), 1e-15);
    EXPECT_GE(emd_loss(p, q), 0.0);
    EXPECT_LE(emd_loss(p, s), emd_loss(p, q) + emd_loss(q, s) + 1e-12);
  }
}

TEST(EmdLoss, BinMismatchIsShapeError) {
  EXPECT_THROW(emd_loss(dist({0.5, 0.5}), dist({0.2, 0.3, 0.5}), {2.0, 2}), ShapeError);
  const ScoreDistribution a({0.5, 0.5}, {1.0, 2.0});
  const ScoreDistribution b({0.5, 0.5}, {1.0, 3.0});
  EXPECT_THROW(emd_loss(a, b, {2.0, 2}), ShapeError);
}

TEST(EmdLoss, ConfigValidation) {
  EXPECT_THROW((EmdConfig{0.5, 10}).validate(), ConfigError);
  EXPECT_THROW(emd_loss(dist({0.5, 0.5}), dist({0.5, 0.5}), {2.0, 3}), ShapeError);
}

TEST(EmdLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(13);
  for (int t = 0; t < 100; ++t) {
    const auto p = testutil::random_simplex(6, gen);
    const auto q = testutil::random_simplex(6, gen);
    const EmdConfig cfg{2.0, 6};
    const auto g = emd_value_and_grad(p, q, cfg);
    const auto num = testutil::numeric_gradient([&](const std::vector<double>& x) {
      return emd_value_and_grad(x, q, cfg).value;
    }, p);
    EXPECT_LT(testutil::relative_error(g.d_p, num), 1e-4) << "t=" << t;
  }
}

// For r = 1 the last CDF gap is |0| on the simplex, so only directions that
// keep the total mass fixed are differentiable. Those are the only
// directions a softmax output can move in.
TEST(EmdLoss, GradientAlongSimplexDirectionsForR1) {
  std::mt19937_64 gen(16);
  for (int t = 0; t < 100; ++t) {
    const auto p = testutil::random_simplex(6, gen);
    const auto q = testutil::random_simplex(6, gen);
    const EmdConfig cfg{1.0, 6};
    const auto g = emd_value_and_grad(p, q, cfg);
    std::vector<double> analytic, numeric;
    for (int k = 0; k < 8; ++k) {
      auto v = testutil::random_vector(6, gen);
      const double m = oracle::mean(v);
      for (auto& x : v) x -= m;
      const double h = 1e-5;
      auto up = p, down = p;
      double dot = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        up[i] += h * v[i];
        down[i] -= h * v[i];
        dot += g.d_p[i] * v[i];
      }
      analytic.push_back(dot);
      numeric.push_back((emd_value_and_grad(up, q, cfg).value - emd_value_and_grad(down, q, cfg).value) / (2 * h));
    }
    EXPECT_LT(testutil::relative_error(analytic, numeric), 1e-4) << "t=" << t;
  }
}

TEST(EmdLoss, ZeroLossHasZeroGradient) {
  const std::vector<double> p{0.2, 0.3, 0.5};
  const auto g = emd_value_and_grad(p, p, {2.0, 3});
  EXPECT_EQ(g.value, 0.0);
  for (double v : g.d_p) EXPECT_EQ(v, 0.0);
}

TEST(AlignmentLoss, MatchesOracleAndRange) {
  std::mt19937_64 gen(14);
  for (int t = 0; t < 200; ++t) {
    const auto a = testutil::random_vector(16, gen);
    const auto b = testutil::random_vector(16, gen);
    const double v = alignment_loss(a, b);
    EXPECT_NEAR(v, oracle::cosine_alignment(a, b, 1e-8), 1e-12);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 2.0);
  }
}

TEST(AlignmentLoss, FrozenValues) {
  const std::vector<double> x{1.0, 2.0, 3.0};
  const std::vector<double> neg{-1.0, -2.0, -3.0};
  const std::vector<double> orth{2.0, -1.0, 0.0};
  EXPECT_NEAR(alignment_loss(x, x), 0.0, 1e-15);
  EXPECT_NEAR(alignment_loss(x, neg), 2.0, 1e-15);
  EXPECT_NEAR(alignment_loss(x, orth), 1.0, 1e-15);
  // Scale invariance.
  const std::vector<double> scaled{10.0, 20.0, 30.0};
  EXPECT_NEAR(alignment_loss(scaled, orth), alignment_loss(x, orth), 1e-15);
}

TEST(AlignmentLoss, ZeroVectorIsFinite) {
  const std::vector<double> zero(4, 0.0);
  const std::vector<double> x{1.0, 0.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(alignment_loss(zero, x), 1.0);
  const auto g = alignment_loss_grad(zero, x);
  for (double v : g.d_x1) EXPECT_TRUE(std::isfinite(v));
  for (double v : g.d_x2) EXPECT_TRUE(std::isfinite(v));
}

TEST(AlignmentLoss, LengthMismatch) {
  EXPECT_THROW(alignment_loss(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST(AlignmentLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(15);
  for (int t = 0; t < 100; ++t) {
    const auto a = testutil::random_vector(8, gen);
    const auto b = testutil::random_vector(8, gen);
    const auto g = alignment_loss_grad(a, b);
    const auto n1 = testutil::numeric_gradient([&](const std::vector<double>& x) { return alignment_loss(x, b); }, a);
    const auto n2 = testutil::numeric_gradient([&](const std::vector<double>& x) { return alignment_loss(a, x); }, b);
    EXPECT_LT(testutil::relative_error(g.d_x1, n1), 1e-4);
    EXPECT_LT(testutil::relative_error(g.d_x2, n2), 1e-4);
  }
}

TEST(BatchLosses, MeansAndComposite) {
  const std::vector<ScoreDistribution> pred{dist({1.0, 0.0}), dist({0.0, 1.0})};
  const std::vector<ScoreDistribution> tgt{dist({0.5, 0.5}), dist({0.0, 1.0})};
  const EmdConfig cfg{2.0, 2};
  EXPECT_NEAR(supervised_loss(pred, tgt, cfg), std::sqrt(0.125) / 2.0, 1e-15);
  EXPECT_NEAR(kd_loss(pred, tgt, cfg), std::sqrt(0.125) / 2.0, 1e-15);
  EXPECT_DOUBLE_EQ(student_loss(0.3, 0.2, {15.0, 15}), 0.3 + 15.0 * 0.2);
  EXPECT_DOUBLE_EQ(student_loss(0.3, 0.2, {0.0, 0}), 0.3);
}

TEST(BatchLosses, ErrorCases) {
  const std::vector<ScoreDistribution> empty;
  const std::vector<ScoreDistribution> one{dist({1.0, 0.0})};
  const std::vector<ScoreDistribution> two{dist({1.0, 0.0}), dist({1.0, 0.0})};
  EXPECT_THROW(supervised_loss(empty, empty, {2.0, 2}), ArgumentError);
  EXPECT_THROW(kd_loss(one, two, {2.0, 2}), ShapeError);
  EXPECT_THROW((SkdLossConfig{-1.0, 1}).validate(), ConfigError);
}
