// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

// Pieces shared by the alignment and distillation trainers.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aeskd/image.hpp"
#include "aeskd/manifest.hpp"
#include "aeskd/metrics.hpp"
#include "aeskd/model_zoo.hpp"

namespace aeskd {

/// Piecewise-constant step decay.
struct ScheduleConfig {
  double lr = 1e-4;
  double decay_factor = 0.1;
  std::vector<std::size_t> decay_epochs{5};
  std::size_t total_epochs = 16;

  void validate() const;
};

/// lr * decay_factor^(number of boundaries <= epoch).
double lr_at(std::size_t epoch, const ScheduleConfig& cfg);

/// One line of a training log.
struct StepRecord {
  std::uint64_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::string batch_digest;
  // Semi-supervised steps only.
  std::optional<double> loss_s;
  std::optional<double> loss_kd;
  std::optional<std::size_t> n_labeled;
  std::optional<std::size_t> n_unlabeled;
  std::optional<std::size_t> kd_terms;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

void to_json(nlohmann::json& j, const StepRecord& r);
void from_json(const nlohmann::json& j, StepRecord& r);

/// Digest of the sample ids of a batch, in order.
std::string batch_digest(std::span<const std::string> ids);

void write_log(const std::filesystem::path& path, std::span<const StepRecord> records);
std::vector<StepRecord> read_log(const std::filesystem::path& path);

/// Records up to and including `step` from the log named `log_name` next to
/// a resume checkpoint; empty when that log does not exist.
std::vector<StepRecord> prior_log(const std::filesystem::path& checkpoint, const std::string& log_name,
                                  std::uint64_t step);

/// Optional run-directory side effects and control of a training loop.
struct TrainHooks {
  /// When set: per-epoch checkpoints, the step log and the skip report go here.
  std::optional<std::filesystem::path> run_dir;
  /// Continue from an epoch checkpoint written by the same trainer.
  std::optional<std::filesystem::path> resume_from;
  /// Stop after this many optimizer steps (whole run, resumed steps included).
  std::optional<std::uint64_t> max_steps;
  std::function<void(const StepRecord&)> on_step;
};

/// Copy of `manifest` without the records the loader cannot decode. Dropped
/// ids land in the loader's skip report.
Manifest decodable_subset(const Manifest& manifest, ImageLoader& loader, int resize);

/// Cropped/flipped 8-bit views of the given records for one epoch.
std::vector<Raster> make_views(const Manifest& manifest, std::span<const std::size_t> indices,
                               ImageLoader& loader, const PreprocessSpec& spec, std::size_t epoch);

std::vector<ImageTensor> normalize_all(std::span<const Raster> views, const std::array<double, 3>& mean,
                                       const std::array<double, 3>& std);

struct EvalOutput {
  std::vector<EvalPair> pairs;  // MOS of the predicted vs labeled distribution
  MetricsReport report;
  bool degenerate = false;      // correlations undefined (constant predictions)
};

/// Eval-mode predictions over a labeled manifest. Throws ArgumentError on an
/// empty manifest and ConfigError on a bin-count mismatch.
EvalOutput evaluate_model(ScoreModel& model, const Manifest& manifest, ImageLoader& loader,
                          const PreprocessSpec& spec, std::size_t batch_size = 64);

/// Throws NumericalError with the step context when `value` is not finite.
void check_finite(double value, std::uint64_t step, double lr, std::span<const std::string> ids);

}  // namespace aeskd
