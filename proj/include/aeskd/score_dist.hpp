// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <span>
#include <vector>

namespace aeskd {

inline constexpr double kNormalizationTolerance = 1e-6;
/// Distributions read from files are renormalized when their mass is off by
/// at most this much, and rejected otherwise.
inline constexpr double kFileRenormalizationTolerance = 1e-3;

/// Bin values 1, 2, ..., d.
std::vector<double> default_bin_values(std::size_t d = 10);

/// Throws ValidationError unless d >= 2 and the values strictly increase.
void validate_bin_values(std::span<const double> bin_values);

/// A d-bin probability vector over aesthetic score bins. Always valid once
/// constructed: non-negative mass summing to one, strictly increasing bins.
class ScoreDistribution {
 public:
  ScoreDistribution(std::vector<double> probs, std::vector<double> bin_values);

  /// Scales a non-negative, non-zero weight vector to unit mass.
  static ScoreDistribution normalized(std::span<const double> weights,
                                      std::vector<double> bin_values);
  /// For probabilities read back from files: renormalizes small drift,
  /// rejects anything further than kFileRenormalizationTolerance.
  static ScoreDistribution from_file_values(std::span<const double> probs,
                                            std::vector<double> bin_values);
  static ScoreDistribution uniform(std::vector<double> bin_values);
  static ScoreDistribution one_hot(std::size_t bin, std::vector<double> bin_values);

  std::size_t size() const noexcept { return probs_.size(); }
  std::span<const double> probs() const noexcept { return probs_; }
  std::span<const double> bin_values() const noexcept { return bin_values_; }
  double operator[](std::size_t i) const { return probs_[i]; }

  bool same_bins(const ScoreDistribution& other) const noexcept;

  friend bool operator==(const ScoreDistribution&, const ScoreDistribution&) = default;

 private:
  std::vector<double> probs_;
  std::vector<double> bin_values_;
};

/// Mean opinion score: expectation of a distribution over its bin values.
struct Mos {
  double value = 0.0;
  friend bool operator==(const Mos&, const Mos&) = default;
};

/// Prefix sums of the bin masses; the last entry is 1 up to rounding.
std::vector<double> cdf(const ScoreDistribution& dist);

Mos mos(const ScoreDistribution& dist);

enum class Discretization {
  nearest_bin,   // one-hot at the closest bin value
  linear_split,  // mass split between the two enclosing bins, preserving the mean
};

/// Adapter for datasets that only publish a scalar MOS. Throws RangeError when
/// the score lies outside [front(bins), back(bins)].
ScoreDistribution scalar_to_distribution(double score, std::span<const double> bin_values,
                                         Discretization mode);

}  // namespace aeskd
