// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include <gtest/gtest.h>

#include <random>

#include "aeskd/errors.hpp"
#include "aeskd/score_dist.hpp"
#include "oracles.hpp"

using namespace aeskd;

TEST(ScoreDistribution, RejectsInvalidMass) {
  const auto bins = default_bin_values(3);
  EXPECT_THROW(ScoreDistribution({0.5, 0.5, 0.5}, bins), ValidationError);
  EXPECT_THROW(ScoreDistribution({1.2, -0.2, 0.0}, bins), ValidationError);
  EXPECT_THROW(ScoreDistribution({0.5, 0.5}, bins), ValidationError);
  EXPECT_NO_THROW(ScoreDistribution({0.2, 0.3, 0.5}, bins));
}

TEST(ScoreDistribution, RejectsBadBins) {
  EXPECT_THROW(validate_bin_values(std::vector<double>{1.0}), ValidationError);
  EXPECT_THROW(validate_bin_values(std::vector<double>{1.0, 1.0, 2.0}), ValidationError);
  EXPECT_THROW(validate_bin_values(std::vector<double>{3.0, 2.0}), ValidationError);
}

TEST(ScoreDistribution, MosOfOneHotIsBinValue) {
  const auto bins = default_bin_values();
  for (std::size_t i = 0; i < bins.size(); ++i) {
    EXPECT_DOUBLE_EQ(mos(ScoreDistribution::one_hot(i, bins)).value, bins[i]);
  }
  EXPECT_DOUBLE_EQ(mos(ScoreDistribution::uniform(bins)).value, 5.5);
}

TEST(ScoreDistribution, CdfEndsAtOne) {
  std::mt19937_64 gen(7);
  for (int t = 0; t < 100; ++t) {
    const auto p = testutil::random_simplex(10, gen);
    const auto c = cdf(ScoreDistribution(p, default_bin_values()));
    EXPECT_NEAR(c.back(), 1.0, 1e-12);
    for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GE(c[i], c[i - 1]);
  }
}

TEST(ScoreDistribution, FileValuesExactWhenNormalized) {
  const std::vector<double> p{0.1, 0.2, 0.7};
  const auto d = ScoreDistribution::from_file_values(p, default_bin_values(3));
  EXPECT_EQ(std::vector<double>(d.probs().begin(), d.probs().end()), p);
}

TEST(ScoreDistribution, FileValuesRenormalizeSmallDrift) {
  const auto d = ScoreDistribution::from_file_values(std::vector<double>{0.1, 0.2, 0.7005}, default_bin_values(3));
  double s = 0.0;
  for (double v : d.probs()) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_THROW(ScoreDistribution::from_file_values(std::vector<double>{0.1, 0.2, 0.8}, default_bin_values(3)),
               ValidationError);
}

TEST(Discretization, LinearSplitPreservesMean) {
  const auto bins = default_bin_values();
  for (double s : {1.0, 1.25, 4.5, 7.999, 10.0}) {
    const auto d = scalar_to_distribution(s, bins, Discretization::linear_split);
    EXPECT_NEAR(mos(d).value, s, 1e-12);
  }
}

TEST(Discretization, NearestBinTiesGoLow) {
  const auto bins = default_bin_values();
  const auto d = scalar_to_distribution(4.5, bins, Discretization::nearest_bin);
  EXPECT_DOUBLE_EQ(d[3], 1.0);
  EXPECT_DOUBLE_EQ(mos(scalar_to_distribution(4.6, bins, Discretization::nearest_bin)).value, 5.0);
}

TEST(Discretization, OutOfRangeThrows) {
  const auto bins = default_bin_values();
  EXPECT_THROW(scalar_to_distribution(0.5, bins, Discretization::linear_split), RangeError);
  EXPECT_THROW(scalar_to_distribution(10.5, bins, Discretization::nearest_bin), RangeError);
}

TEST(Discretization, CustomBins) {
  const std::vector<double> bins{0.0, 0.25, 0.5, 0.75, 1.0};
  const auto d = scalar_to_distribution(0.3, bins, Discretization::linear_split);
  EXPECT_NEAR(d[1], 0.8, 1e-12);
  EXPECT_NEAR(d[2], 0.2, 1e-12);
}
