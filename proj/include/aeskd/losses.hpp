// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <span>
#include <vector>

#include "aeskd/score_dist.hpp"

namespace aeskd {

struct AlignmentConfig {
  double epsilon = 1e-8;  // lower bound on ||x1||*||x2||
};

struct EmdConfig {
  double r = 2.0;     // CDF-difference exponent, r >= 1
  std::size_t d = 10; // bin count

  void validate() const;
};

struct SkdLossConfig {
  double beta = 15.0;    // weight of the distillation term
  std::size_t mu = 15;   // unlabeled samples per labeled sample in a batch

  void validate() const;
};

/// 1 - <x1, x2> / max(||x1|| ||x2||, eps). Lies in [0, 2].
double alignment_loss(std::span<const double> x1, std::span<const double> x2,
                      const AlignmentConfig& cfg = {});

struct AlignmentValueAndGrad {
  double value = 0.0;
  std::vector<double> d_x1;
  std::vector<double> d_x2;
};

AlignmentValueAndGrad alignment_loss_grad(std::span<const double> x1, std::span<const double> x2,
                                          const AlignmentConfig& cfg = {});

/// ((1/d) sum_i |CDF_p(i) - CDF_q(i)|^r)^(1/r) over validated distributions.
double emd_loss(const ScoreDistribution& p, const ScoreDistribution& q, const EmdConfig& cfg = {});

struct EmdValueAndGrad {
  double value = 0.0;
  std::vector<double> d_p;  // gradient with respect to the raw entries of p
};

/// The same closed form on raw vectors (no simplex check), with the exact
/// gradient in p. This is the path the trainers backpropagate through.
/// Where the loss is exactly zero the gradient is defined as zero; for r = 1
/// the subgradient at a zero CDF difference is zero.
EmdValueAndGrad emd_value_and_grad(std::span<const double> p, std::span<const double> q,
                                   const EmdConfig& cfg = {});

/// Supervision loss: mean EMD over the labeled part of a batch.
double supervised_loss(std::span<const ScoreDistribution> predictions,
                       std::span<const ScoreDistribution> targets, const EmdConfig& cfg = {});

/// Mean EMD against teacher pseudo labels over the FULL mixed batch.
double kd_loss(std::span<const ScoreDistribution> predictions,
               std::span<const ScoreDistribution> pseudo_targets, const EmdConfig& cfg = {});

/// sup + beta * kd
double student_loss(double sup, double kd, const SkdLossConfig& cfg = {});

}  // namespace aeskd
