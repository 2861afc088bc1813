// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

// Layered run configuration: profile defaults, then a JSON config file, then
// `key=value` overrides. The defaults tree is the schema: an overlay may only
// set keys the profile defines, with a value of the same JSON type.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aeskd/image.hpp"
#include "aeskd/metrics.hpp"
#include "aeskd/model_zoo.hpp"
#include "aeskd/trainer_cfa.hpp"
#include "aeskd/trainer_skd.hpp"

namespace aeskd {

/// "desk" (CI scale) or "paper". Throws ConfigError for other names.
nlohmann::json profile_defaults(const std::string& profile);

/// Recursively overlays `overlay` onto `base`. Unknown keys and type changes
/// raise ConfigError naming the dotted key.
void merge_config(nlohmann::json& base, const nlohmann::json& overlay, const std::string& prefix = "");

/// Applies "a.b.c=value". The value is parsed as JSON when possible and taken
/// as a string otherwise.
void apply_override(nlohmann::json& config, const std::string& assignment);

struct ConfigSources {
  std::optional<std::string> profile;            // wins over the file's "profile"
  std::optional<std::filesystem::path> file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;             // applied after the overrides
};

/// Fully resolved and validated config.
nlohmann::json resolve_config(const ConfigSources& sources);

/// $AESKD_RUN_ROOT, or "runs" under the working directory.
std::filesystem::path default_run_root();

/// run_dir from the config, else <run root>/<command>-<seed>. Creates it and
/// writes config.json before returning.
std::filesystem::path prepare_run_dir(const nlohmann::json& config, const std::string& command);

// Typed views of a resolved config.
PreprocessSpec preprocess_from(const nlohmann::json& config);
std::array<double, 3> teacher_mean_from(const nlohmann::json& config);
std::array<double, 3> teacher_std_from(const nlohmann::json& config);
EncoderSpec student_spec_from(const nlohmann::json& config);
EncoderSpec teacher_spec_from(const nlohmann::json& config);
HeadSpec head_spec_from(const nlohmann::json& config);
ScheduleConfig schedule_from(const nlohmann::json& config);
nn::AdamConfig adam_from(const nlohmann::json& config);
CfaConfig cfa_from(const nlohmann::json& config);
SupervisedConfig supervised_from(const nlohmann::json& config);
SkdRunConfig skd_from(const nlohmann::json& config);
IerConfig ier_from(const nlohmann::json& config);
Discretization discretization_from(const nlohmann::json& config);

}  // namespace aeskd
