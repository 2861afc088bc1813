// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aeskd/errors.hpp"

namespace aeskd::cli {

/// Process exit code for an error category.
int exit_code(ErrorKind kind);

struct MakeManifestOptions {
  std::vector<std::filesystem::path> dirs;
  std::vector<std::string> sources;     // per dir; defaults to the directory name
  std::optional<std::filesystem::path> labels;
  std::vector<std::filesystem::path> merge;
  std::filesystem::path out;
  std::size_t bins = 10;
};

/// Returns the stats printed to stdout.
nlohmann::json cmd_make_manifest(const MakeManifestOptions& opts);

struct SynthOptions {
  std::filesystem::path out;
  std::size_t n = 256;
  std::size_t unlabeled = 0;
  int image_size = 48;
  std::uint64_t seed = 0;
  double noise = 0.0;
  double spread = 1.0;
  std::string source = "synthetic";
};

nlohmann::json cmd_synth(const SynthOptions& opts);

struct TrainOptions {
  nlohmann::json config;  // resolved
  std::optional<std::filesystem::path> resume;
  std::optional<std::uint64_t> max_steps;
};

/// Each returns the run directory.
std::filesystem::path cmd_cfa(const TrainOptions& opts);
std::filesystem::path cmd_finetune_teacher(const TrainOptions& opts);
std::filesystem::path cmd_skd(const TrainOptions& opts);

struct EvalOptions {
  nlohmann::json config;
  std::filesystem::path checkpoint;
  std::optional<std::filesystem::path> manifest;  // defaults to data.eval
  std::filesystem::path out;
};

/// Writes metrics.json and ier_plot.tsv into opts.out.
nlohmann::json cmd_eval(const EvalOptions& opts);

struct AttnOptions {
  nlohmann::json config;
  std::filesystem::path before;
  std::filesystem::path after;
  std::optional<std::filesystem::path> manifest;  // defaults to data.probe
  std::filesystem::path out;
};

/// Writes attention_report.json and attention_plot.tsv into opts.out.
nlohmann::json cmd_attn_report(const AttnOptions& opts);

}  // namespace aeskd::cli
