// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "aeskd/score_dist.hpp"

namespace aeskd {

struct EvalPair {
  Mos pred;
  Mos truth;
};

std::vector<EvalPair> make_pairs(std::span<const double> pred, std::span<const double> truth);

double mse(std::span<const EvalPair> pairs);

/// Sample Pearson correlation of pred against truth. Throws
/// DegenerateInputError when either series has zero variance.
double plcc(std::span<const EvalPair> pairs);

/// Pearson correlation of the average-ranked series.
double srcc(std::span<const EvalPair> pairs);

/// Average (fractional) ranks, 1-based; tied values share the mean of the
/// positions they occupy.
std::vector<double> average_ranks(std::span<const double> values);

struct MetricsReport {
  double mse = 0.0;
  double srcc = 0.0;
  double plcc = 0.0;
  std::size_t n = 0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport evaluate(std::span<const EvalPair> pairs);

struct IerConfig {
  std::size_t intervals = 5;  // K; no published default
  double tolerance = 0.5;     // t
  double lo = 1.0;
  double hi = 10.0;

  void validate() const;
};

struct IerInterval {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;        // N_k
  std::size_t errors = 0;       // samples with |pred - truth| > t
  std::optional<double> rate;   // empty when count == 0

  friend bool operator==(const IerInterval&, const IerInterval&) = default;
};

struct IerReport {
  double tolerance = 0.5;
  std::vector<IerInterval> intervals;
  std::size_t out_of_range = 0;  // truth outside [lo, hi]; not assigned to any interval

  friend bool operator==(const IerReport&, const IerReport&) = default;
};

/// Interval boundaries b_0 = lo < ... < b_K = hi. Interval k is [b_k, b_k+1),
/// except the last which also contains hi.
std::vector<double> interval_bounds(const IerConfig& cfg);

/// Index of the interval containing `score`, or nullopt outside [lo, hi].
std::optional<std::size_t> interval_index(std::span<const double> bounds, double score);

/// Samples are placed by TRUTH score.
IerReport interval_error_rate(std::span<const EvalPair> pairs, const IerConfig& cfg = {});

void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);
void to_json(nlohmann::json& j, const IerReport& r);
void from_json(const nlohmann::json& j, IerReport& r);

}  // namespace aeskd
