// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "aeskd/checkpoint.hpp"
#include "aeskd/losses.hpp"
#include "aeskd/model_zoo.hpp"
#include "aeskd/nn/optim.hpp"
#include "aeskd/training.hpp"

namespace aeskd {

enum class TeacherSourceKind { live, cache };

struct CfaConfig {
  ScheduleConfig schedule;  // 1e-4, x0.1 at epoch 5, 16 epochs
  std::size_t batch_size = 32;
  nn::AdamConfig adam;      // lr is driven by the schedule
  AlignmentConfig alignment;
  TeacherSourceKind teacher_source = TeacherSourceKind::cache;
  /// Global-norm gradient clipping; off unless set.
  std::optional<double> grad_clip;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Where the frozen target features come from.
class TeacherFeatureSource {
 public:
  virtual ~TeacherFeatureSource() = default;
  virtual std::size_t feature_dim() const = 0;
  /// Features for `records`, whose shared augmented views are `views`.
  virtual nn::Matrix features(std::span<const SampleRecord* const> records, std::span<const Raster> views) = 0;
};

/// Runs the frozen encoder on the same augmented view the student sees,
/// normalized with the teacher's own convention.
class LiveTeacher final : public TeacherFeatureSource {
 public:
  LiveTeacher(FrozenEncoder& encoder, std::array<double, 3> mean, std::array<double, 3> std)
      : encoder_(encoder), mean_(mean), std_(std) {}

  std::size_t feature_dim() const override { return encoder_.spec().feature_dim; }
  nn::Matrix features(std::span<const SampleRecord* const> records, std::span<const Raster> views) override;

 private:
  FrozenEncoder& encoder_;
  std::array<double, 3> mean_;
  std::array<double, 3> std_;
};

/// Looks features up by sample id; the views are ignored.
class CachedTeacher final : public TeacherFeatureSource {
 public:
  explicit CachedTeacher(const FeatureCache& cache) : cache_(cache) {}

  std::size_t feature_dim() const override { return cache_.feature_dim; }
  nn::Matrix features(std::span<const SampleRecord* const> records, std::span<const Raster> views) override;

 private:
  const FeatureCache& cache_;
};

struct CfaResult {
  std::vector<StepRecord> log;
  std::vector<double> epoch_mean_loss;  // epochs run in this call
  std::uint64_t steps = 0;              // total optimizer steps, resumed ones included
  std::size_t next_epoch = 0;
};

/// Aligns backbone + projector to the teacher features over an unlabeled
/// manifest, minimizing the mean per-sample alignment loss of each batch.
/// With hooks.run_dir set, writes cfa_epoch_<e>.ckpt after every epoch and
/// backbone.ckpt / projector.ckpt / cfa_log.jsonl at the end.
CfaResult run_cfa(ProjectedEncoder& student, TeacherFeatureSource& teacher, const Manifest& unlabeled,
                  ImageLoader& loader, const PreprocessSpec& student_spec, const CfaConfig& cfg,
                  const TrainHooks& hooks = {});

}  // namespace aeskd
