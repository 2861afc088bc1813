// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "aeskd/errors.hpp"
#include "aeskd/metrics.hpp"
#include "oracles.hpp"

using namespace aeskd;

namespace {

std::vector<double> tied_series(std::size_t n, std::mt19937_64& gen) {
  // Coarse values so ties are common.
  std::uniform_int_distribution<int> u(0, 12);
  std::vector<double> x(n);
  for (auto& v : x) v = 1.0 + 0.75 * u(gen);
  return x;
}

}  // namespace

TEST(Metrics, MatchTextbookOracles) {
  std::mt19937_64 gen(21);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 3 + gen() % 60;
    const auto a = t % 2 ? tied_series(n, gen) : testutil::random_vector(n, gen);
    const auto b = t % 3 ? tied_series(n, gen) : testutil::random_vector(n, gen);
    if (oracle::ranks(a) == std::vector<double>(n, (n + 1) / 2.0)) continue;
    if (oracle::ranks(b) == std::vector<double>(n, (n + 1) / 2.0)) continue;
    const auto pairs = make_pairs(a, b);
    EXPECT_NEAR(mse(pairs), oracle::mse(a, b), 1e-12);
    EXPECT_NEAR(plcc(pairs), oracle::pearson(a, b), 1e-12);
    EXPECT_NEAR(srcc(pairs), oracle::spearman(a, b), 1e-12);
  }
}

TEST(Metrics, AverageRanksWithTies) {
  const std::vector<double> x{3.0, 1.0, 3.0, 2.0, 3.0};
  EXPECT_EQ(average_ranks(x), (std::vector<double>{4.0, 1.0, 4.0, 2.0, 4.0}));
  EXPECT_EQ(average_ranks(x), oracle::ranks(x));
}

TEST(Metrics, FrozenValues) {
  const auto pairs = make_pairs(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4});
  EXPECT_DOUBLE_EQ(mse(pairs), 0.5);
  EXPECT_NEAR(srcc(pairs), 0.8, 1e-15);
  EXPECT_NEAR(plcc(pairs), 0.8, 1e-15);
}

TEST(Metrics, SrccInvariantUnderMonotoneTransform) {
  std::mt19937_64 gen(22);
  for (int t = 0; t < 100; ++t) {
    const auto a = tied_series(40, gen);
    const auto b = testutil::random_vector(40, gen);
    std::vector<double> f(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) f[i] = std::exp(2.0 * a[i]) + 3.0 * a[i] * a[i] * a[i];
    EXPECT_EQ(srcc(make_pairs(a, b)), srcc(make_pairs(f, b)));
  }
}

TEST(Metrics, Reversal) {
  const auto pairs = make_pairs(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{5, 4, 3, 2, 1});
  EXPECT_DOUBLE_EQ(srcc(pairs), -1.0);
  EXPECT_DOUBLE_EQ(plcc(pairs), -1.0);
}

TEST(Metrics, DegenerateInputs) {
  const auto constant = make_pairs(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3});
  EXPECT_THROW(plcc(constant), DegenerateInputError);
  EXPECT_THROW(srcc(constant), DegenerateInputError);
  EXPECT_THROW(mse(std::vector<EvalPair>{}), ArgumentError);
  EXPECT_THROW(make_pairs(std::vector<double>{1}, std::vector<double>{1, 2}), ShapeError);
}

TEST(Metrics, ReportRoundTrip) {
  const MetricsReport r{0.125, 0.75, 0.8125, 42};
  const nlohmann::json j = r;
  EXPECT_EQ(j.get<MetricsReport>(), r);
  EXPECT_EQ(nlohmann::json::parse(j.dump()).get<MetricsReport>(), r);
}

TEST(Ier, HandEnumerated) {
  // Intervals over [1, 10], K = 3: [1, 4), [4, 7), [7, 10].
  const IerConfig cfg{3, 0.5, 1.0, 10.0};
  const std::vector<double> truth{1.0, 2.0, 3.9, 4.0, 6.5, 10.0, 9.0};
  const std::vector<double> pred{1.2, 2.6, 3.9, 4.5, 5.0, 9.4, 9.0};
  // errors: |0.2| no, |0.6| yes, 0 no | 0.5 no (not > t), 1.5 yes | 0.6 yes, 0 no
  const auto rep = interval_error_rate(make_pairs(pred, truth), cfg);
  ASSERT_EQ(rep.intervals.size(), 3u);
  EXPECT_EQ(rep.intervals[0].count, 3u);
  EXPECT_EQ(rep.intervals[0].errors, 1u);
  EXPECT_DOUBLE_EQ(*rep.intervals[0].rate, 1.0 / 3.0);
  EXPECT_EQ(rep.intervals[1].count, 2u);
  EXPECT_EQ(rep.intervals[1].errors, 1u);
  EXPECT_EQ(rep.intervals[2].count, 2u);
  EXPECT_EQ(rep.intervals[2].errors, 1u);
  EXPECT_EQ(rep.out_of_range, 0u);
}

TEST(Ier, EmptyIntervalsUndefinedAndOutOfRange) {
  const IerConfig cfg{4, 0.5, 0.0, 4.0};
  const auto rep = interval_error_rate(make_pairs(std::vector<double>{0.5, 5.0}, std::vector<double>{0.5, 4.5}), cfg);
  EXPECT_EQ(rep.intervals[0].count, 1u);
  EXPECT_DOUBLE_EQ(*rep.intervals[0].rate, 0.0);
  for (std::size_t k = 1; k < 4; ++k) EXPECT_FALSE(rep.intervals[k].rate.has_value());
  EXPECT_EQ(rep.out_of_range, 1u);
}

TEST(Ier, CountsPartitionTheSample) {
  std::mt19937_64 gen(23);
  std::uniform_real_distribution<double> u(1.0, 10.0);
  std::vector<double> p(500), t(500);
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = u(gen);
    t[i] = u(gen);
  }
  for (std::size_t k : {1u, 5u, 9u}) {
    const auto rep = interval_error_rate(make_pairs(p, t), {k, 0.5, 1.0, 10.0});
    std::size_t total = 0;
    for (const auto& iv : rep.intervals) {
      total += iv.count;
      EXPECT_LE(iv.errors, iv.count);
    }
    EXPECT_EQ(total + rep.out_of_range, p.size());
  }
}

TEST(Ier, ReportRoundTrip) {
  const auto rep = interval_error_rate(make_pairs(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 3.0}),
                                       {3, 0.5, 1.0, 10.0});
  const nlohmann::json j = rep;
  EXPECT_TRUE(j["intervals"][2]["rate"].is_null());
  EXPECT_EQ(nlohmann::json::parse(j.dump()).get<IerReport>(), rep);
}

TEST(Ier, ConfigValidation) {
  EXPECT_THROW((IerConfig{0, 0.5, 1.0, 10.0}).validate(), ConfigError);
  EXPECT_THROW((IerConfig{5, 0.0, 1.0, 10.0}).validate(), ConfigError);
  EXPECT_THROW((IerConfig{5, 0.5, 3.0, 3.0}).validate(), ConfigError);
}
