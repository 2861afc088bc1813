// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/losses.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "aeskd/errors.hpp"

namespace aeskd {

void EmdConfig::validate() const {
  if (!(r >= 1.0) || !std::isfinite(r)) throw ConfigError(fmt::format("emd r must be >= 1, got {}", r));
  if (d < 2) throw ConfigError("emd bin count must be >= 2");
}

void SkdLossConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be >= 0");
}

namespace {

struct AlignmentTerms {
  double dot = 0.0;
  double sq1 = 0.0;
  double sq2 = 0.0;
  double denom = 0.0;
  bool clamped = false;
};

AlignmentTerms alignment_terms(std::span<const double> x1, std::span<const double> x2,
                               const AlignmentConfig& cfg) {
  if (x1.size() != x2.size() || x1.empty()) {
    throw ShapeError(fmt::format("alignment inputs have lengths {} and {}", x1.size(), x2.size()));
  }
  if (!(cfg.epsilon > 0.0)) throw ConfigError("alignment epsilon must be positive");
  AlignmentTerms t;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    t.dot += x1[i] * x2[i];
    t.sq1 += x1[i] * x1[i];
    t.sq2 += x2[i] * x2[i];
  }
  const double norms = std::sqrt(t.sq1) * std::sqrt(t.sq2);
  t.clamped = !(norms > cfg.epsilon);
  t.denom = t.clamped ? cfg.epsilon : norms;
  return t;
}

}  // namespace

double alignment_loss(std::span<const double> x1, std::span<const double> x2,
                      const AlignmentConfig& cfg) {
  const auto t = alignment_terms(x1, x2, cfg);
  return 1.0 - t.dot / t.denom;
}

AlignmentValueAndGrad alignment_loss_grad(std::span<const double> x1, std::span<const double> x2,
                                          const AlignmentConfig& cfg) {
  const auto t = alignment_terms(x1, x2, cfg);
  AlignmentValueAndGrad out;
  out.value = 1.0 - t.dot / t.denom;
  out.d_x1.resize(x1.size());
  out.d_x2.resize(x2.size());
  const double cos = t.dot / t.denom;
  for (std::size_t i = 0; i < x1.size(); ++i) {
    if (t.clamped) {
      out.d_x1[i] = -x2[i] / t.denom;
      out.d_x2[i] = -x1[i] / t.denom;
    } else {
      out.d_x1[i] = -x2[i] / t.denom + cos * x1[i] / t.sq1;
      out.d_x2[i] = -x1[i] / t.denom + cos * x2[i] / t.sq2;
    }
  }
  return out;
}

EmdValueAndGrad emd_value_and_grad(std::span<const double> p, std::span<const double> q,
                                   const EmdConfig& cfg) {
  cfg.validate();
  if (p.size() != cfg.d || q.size() != cfg.d) {
    throw ShapeError(fmt::format("emd inputs have {} and {} bins, config expects {}", p.size(),
                                 q.size(), cfg.d));
  }
  const std::size_t d = cfg.d;
  std::vector<double> diff(d);
  double cp = 0.0;
  double cq = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    cp += p[i];
    cq += q[i];
    diff[i] = cp - cq;
    total += std::pow(std::abs(diff[i]), cfg.r);
  }
  const double mean = total / static_cast<double>(d);
  EmdValueAndGrad out;
  out.value = std::pow(mean, 1.0 / cfg.r);
  out.d_p.assign(d, 0.0);
  if (!(mean > 0.0)) return out;

  // dL/dc_i = mean^(1/r - 1) * |c_i|^(r-1) * sign(c_i) / d, then a suffix sum
  // because c_i depends on p_j for every j <= i.
  const double outer = std::pow(mean, 1.0 / cfg.r - 1.0) / static_cast<double>(d);
  double suffix = 0.0;
  for (std::size_t k = d; k-- > 0;) {
    const double c = diff[k];
    double g = 0.0;
    if (c != 0.0) g = outer * std::pow(std::abs(c), cfg.r - 1.0) * (c > 0.0 ? 1.0 : -1.0);
    suffix += g;
    out.d_p[k] = suffix;
  }
  return out;
}

double emd_loss(const ScoreDistribution& p, const ScoreDistribution& q, const EmdConfig& cfg) {
  if (!p.same_bins(q)) throw ShapeError("emd inputs use different bin values");
  return emd_value_and_grad(p.probs(), q.probs(), cfg).value;
}

namespace {

double mean_emd(std::span<const ScoreDistribution> predictions,
                std::span<const ScoreDistribution> targets, const EmdConfig& cfg,
                const char* what) {
  if (predictions.empty()) throw ArgumentError(fmt::format("{} over an empty batch", what));
  if (predictions.size() != targets.size()) {
    throw ShapeError(fmt::format("{}: {} predictions vs {} targets", what, predictions.size(),
                                 targets.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    total += emd_loss(predictions[i], targets[i], cfg);
  }
  return total / static_cast<double>(predictions.size());
}

}  // namespace

double supervised_loss(std::span<const ScoreDistribution> predictions,
                       std::span<const ScoreDistribution> targets, const EmdConfig& cfg) {
  return mean_emd(predictions, targets, cfg, "supervised loss");
}

double kd_loss(std::span<const ScoreDistribution> predictions,
               std::span<const ScoreDistribution> pseudo_targets, const EmdConfig& cfg) {
  return mean_emd(predictions, pseudo_targets, cfg, "distillation loss");
}

double student_loss(double sup, double kd, const SkdLossConfig& cfg) {
  return sup + cfg.beta * kd;
}

}  // namespace aeskd
