// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "aeskd/batching.hpp"
#include "aeskd/checkpoint.hpp"
#include "aeskd/losses.hpp"
#include "aeskd/metrics.hpp"
#include "aeskd/model_zoo.hpp"
#include "aeskd/nn/optim.hpp"
#include "aeskd/training.hpp"

namespace aeskd {

/// Plain EMD fine-tuning on labeled batches (teacher fine-tuning, and the
/// supervised-only baseline).
struct SupervisedConfig {
  ScheduleConfig schedule;
  std::size_t batch_size = 16;
  EmdConfig emd;
  Discretization discretization = Discretization::linear_split;
  nn::AdamConfig adam;
  std::optional<double> grad_clip;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SkdRunConfig {
  ScheduleConfig schedule;
  SkdLossConfig loss;  // beta, mu
  BatchPlan plan;      // plan.mu must equal loss.mu
  EmdConfig emd;
  Discretization discretization = Discretization::linear_split;
  nn::AdamConfig adam;
  std::optional<double> grad_clip;
  std::uint64_t seed = 0;
  /// Teacher input normalization when it differs from the student's.
  std::optional<std::array<double, 3>> teacher_mean;
  std::optional<std::array<double, 3>> teacher_std;

  void validate() const;
};

struct EpochEval {
  std::size_t epoch = 0;
  MetricsReport report;
  bool degenerate = false;
};

struct TrainResult {
  std::vector<StepRecord> log;
  std::uint64_t steps = 0;
  std::vector<EpochEval> evals;          // one per epoch when an eval manifest is given
  std::optional<MetricsReport> final_report;
  std::optional<EpochEval> best;         // highest eval SRCC
};

/// Supervised EMD training of backbone + head. Run-dir outputs:
/// <name>_epoch_<e>.ckpt, <name>.ckpt (final, with its eval report),
/// <name>_best.ckpt, <name>_log.jsonl.
TrainResult finetune_teacher(ScoreModel& model, const Manifest& labeled, const Manifest* eval,
                             ImageLoader& loader, const PreprocessSpec& spec, const SupervisedConfig& cfg,
                             const TrainHooks& hooks = {}, const std::string& name = "teacher");

/// Teacher predictions for a batch of views; always valid distributions.
std::vector<ScoreDistribution> generate_pseudo_labels(FrozenScoreModel& teacher,
                                                      std::span<const ImageTensor> images,
                                                      const std::vector<double>& bin_values);

/// Semi-supervised distillation. Each step: compose b_s labeled + mu*b_s
/// unlabeled samples, run the student on all of them, take the supervised
/// EMD over the labeled part and the distillation EMD against the teacher's
/// pseudo labels over the whole batch, and step on L_s + beta * L_kd.
/// Run-dir outputs mirror finetune_teacher with name "student".
TrainResult run_skd(ScoreModel& student, FrozenScoreModel& teacher, const Manifest& labeled,
                    const Manifest& unlabeled, const Manifest* eval, ImageLoader& loader,
                    const PreprocessSpec& spec, const SkdRunConfig& cfg, const TrainHooks& hooks = {});

}  // namespace aeskd
