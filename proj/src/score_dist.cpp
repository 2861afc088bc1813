// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/score_dist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <fmt/format.h>

#include "aeskd/errors.hpp"

namespace aeskd {

std::vector<double> default_bin_values(std::size_t d) {
  std::vector<double> bins(d);
  std::iota(bins.begin(), bins.end(), 1.0);
  return bins;
}

void validate_bin_values(std::span<const double> bin_values) {
  if (bin_values.size() < 2) {
    throw ValidationError(fmt::format("need at least 2 bins, got {}", bin_values.size()));
  }
  for (std::size_t i = 0; i < bin_values.size(); ++i) {
    if (!std::isfinite(bin_values[i])) throw ValidationError("bin value is not finite");
    if (i > 0 && !(bin_values[i] > bin_values[i - 1])) {
      throw ValidationError(fmt::format("bin values must strictly increase (index {})", i));
    }
  }
}

namespace {

void validate_probs(std::span<const double> probs, std::size_t d) {
  if (probs.size() != d) {
    throw ValidationError(
        fmt::format("distribution has {} entries but {} bins", probs.size(), d));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!std::isfinite(probs[i]) || probs[i] < 0.0) {
      throw ValidationError(fmt::format("negative or non-finite mass {} at bin {}", probs[i], i));
    }
    total += probs[i];
  }
  if (std::abs(total - 1.0) > kNormalizationTolerance) {
    throw ValidationError(fmt::format("distribution mass {} is not 1", total));
  }
}

}  // namespace

ScoreDistribution::ScoreDistribution(std::vector<double> probs, std::vector<double> bin_values)
    : probs_(std::move(probs)), bin_values_(std::move(bin_values)) {
  validate_bin_values(bin_values_);
  validate_probs(probs_, bin_values_.size());
}

ScoreDistribution ScoreDistribution::normalized(std::span<const double> weights,
                                                std::vector<double> bin_values) {
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("weights must be non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("cannot normalize an all-zero weight vector");
  std::vector<double> probs(weights.begin(), weights.end());
  for (double& p : probs) p /= total;
  return {std::move(probs), std::move(bin_values)};
}

ScoreDistribution ScoreDistribution::from_file_values(std::span<const double> probs,
                                                      std::vector<double> bin_values) {
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) throw ValidationError("negative or non-finite mass");
    total += p;
  }
  if (std::abs(total - 1.0) > kFileRenormalizationTolerance) {
    throw ValidationError(fmt::format("stored distribution mass {} is too far from 1", total));
  }
  if (std::abs(total - 1.0) <= kNormalizationTolerance) {
    return {std::vector<double>(probs.begin(), probs.end()), std::move(bin_values)};
  }
  return normalized(probs, std::move(bin_values));
}

ScoreDistribution ScoreDistribution::uniform(std::vector<double> bin_values) {
  const std::vector<double> ones(bin_values.size(), 1.0);
  return normalized(ones, std::move(bin_values));
}

ScoreDistribution ScoreDistribution::one_hot(std::size_t bin, std::vector<double> bin_values) {
  if (bin >= bin_values.size()) throw RangeError("one-hot bin index out of range");
  std::vector<double> probs(bin_values.size(), 0.0);
  probs[bin] = 1.0;
  return {std::move(probs), std::move(bin_values)};
}

bool ScoreDistribution::same_bins(const ScoreDistribution& other) const noexcept {
  return bin_values_ == other.bin_values_;
}

std::vector<double> cdf(const ScoreDistribution& dist) {
  std::vector<double> out(dist.size());
  std::partial_sum(dist.probs().begin(), dist.probs().end(), out.begin());
  return out;
}

Mos mos(const ScoreDistribution& dist) {
  double value = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) value += dist.bin_values()[i] * dist[i];
  return {value};
}

ScoreDistribution scalar_to_distribution(double score, std::span<const double> bin_values,
                                         Discretization mode) {
  validate_bin_values(bin_values);
  std::vector<double> bins(bin_values.begin(), bin_values.end());
  if (!std::isfinite(score) || score < bins.front() || score > bins.back()) {
    throw RangeError(fmt::format("score {} outside bin range [{}, {}]", score, bins.front(),
                                 bins.back()));
  }
  // First bin whose value is >= score.
  const auto upper = static_cast<std::size_t>(
      std::lower_bound(bins.begin(), bins.end(), score) - bins.begin());
  if (bins[upper] == score) return ScoreDistribution::one_hot(upper, std::move(bins));
  const std::size_t lower = upper - 1;
  if (mode == Discretization::nearest_bin) {
    // Ties go to the lower bin.
    const bool pick_upper = (bins[upper] - score) < (score - bins[lower]);
    return ScoreDistribution::one_hot(pick_upper ? upper : lower, std::move(bins));
  }
  const double w_upper = (score - bins[lower]) / (bins[upper] - bins[lower]);
  std::vector<double> probs(bins.size(), 0.0);
  probs[lower] = 1.0 - w_upper;
  probs[upper] = w_upper;
  return {std::move(probs), std::move(bins)};
}

}  // namespace aeskd
