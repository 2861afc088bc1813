// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/config.hpp"

#include <cstdlib>
#include <fstream>

#include <fmt/format.h>

#include "aeskd/errors.hpp"

namespace aeskd {

using nlohmann::json;

namespace {

json desk_profile() {
  return json{
      {"profile", "desk"},
      {"seed", 0},
      {"run_dir", ""},
      {"data", {{"labeled", ""}, {"unlabeled", ""}, {"eval", ""}, {"probe", ""}}},
      {"preprocess",
       {{"resize", 36},
        {"crop", 32},
        {"hflip_prob", 0.5},
        {"mean", {0.485, 0.456, 0.406}},
        {"std", {0.229, 0.224, 0.225}}}},
      {"teacher_preprocess",
       {{"mean", {0.48145466, 0.4578275, 0.40821073}}, {"std", {0.26862954, 0.26130258, 0.27577711}}}},
      {"student",
       {{"family", "tiny-transformer"},
        {"patch", 8},
        {"depth", 2},
        {"width", 32},
        {"heads", 2},
        {"mlp_hidden", 64},
        {"conv_channels", {16, 32}},
        {"feature_dim", 32}}},
      {"teacher",
       {{"name", "frozen-encoder"},
        {"checkpoint", ""},
        {"init_seed", 1234},
        {"family", "tiny-transformer"},
        {"patch", 8},
        {"depth", 2},
        {"width", 48},
        {"heads", 3},
        {"mlp_hidden", 96},
        {"conv_channels", {16, 32}},
        {"feature_dim", 48}}},
      {"projector", {{"dims", json::array()}}},
      {"head", {{"hidden", {64}}, {"bins", 10}}},
      {"schedule", {{"lr", 1e-3}, {"decay_factor", 0.1}, {"decay_epochs", {4}}, {"total_epochs", 5}}},
      {"optimizer", {{"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}, {"grad_clip", 0.0}}},
      {"cfa", {{"batch_size", 16}, {"epsilon", 1e-8}, {"teacher_source", "cache"}, {"cache", ""}}},
      {"emd", {{"r", 2.0}}},
      {"labels", {{"discretization", "linear-split"}}},
      {"finetune", {{"batch_size", 16}, {"init", ""}}},
      {"skd",
       {{"beta", 1.0}, {"mu", 4}, {"b_s", 4}, {"teacher_checkpoint", ""}, {"student_init", ""}}},
      {"eval", {{"intervals", 5}, {"tolerance", 0.5}, {"score_lo", 1.0}, {"score_hi", 10.0}}},
      {"attention", {{"probe_size", 64}}},
  };
}

json paper_profile() {
  json p = desk_profile();
  p["profile"] = "paper";
  p["preprocess"]["resize"] = 256;
  p["preprocess"]["crop"] = 224;
  p["student"]["patch"] = 16;
  p["teacher"]["patch"] = 14;
  p["schedule"] = {{"lr", 1e-4}, {"decay_factor", 0.1}, {"decay_epochs", {5}}, {"total_epochs", 16}};
  p["cfa"]["batch_size"] = 32;
  p["finetune"]["batch_size"] = 32;
  p["skd"]["beta"] = 15.0;
  p["skd"]["mu"] = 15;
  p["skd"]["b_s"] = 4;
  return p;
}

const char* type_name(const json& j) { return j.type_name(); }

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) {
    // Integers stay integers; a float default accepts integer overlays.
    return !(a.is_number_integer() && b.is_number_float());
  }
  return a.type() == b.type();
}

std::array<double, 3> triple(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(fmt::format("{} must hold 3 numbers", key));
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

EncoderSpec encoder_from(const json& node, std::size_t image_size) {
  EncoderSpec s;
  s.family = parse_family(node.at("family").get<std::string>());
  s.image_size = image_size;
  s.patch = node.at("patch").get<std::size_t>();
  s.depth = node.at("depth").get<std::size_t>();
  s.width = node.at("width").get<std::size_t>();
  s.heads = node.at("heads").get<std::size_t>();
  s.mlp_hidden = node.at("mlp_hidden").get<std::size_t>();
  s.conv_channels = node.at("conv_channels").get<std::vector<std::size_t>>();
  s.feature_dim = node.at("feature_dim").get<std::size_t>();
  return s;
}

Discretization parse_discretization(const std::string& name) {
  if (name == "linear-split") return Discretization::linear_split;
  if (name == "nearest-bin") return Discretization::nearest_bin;
  throw ConfigError(fmt::format("labels.discretization: unknown mode '{}'", name));
}

}  // namespace

json profile_defaults(const std::string& profile) {
  if (profile == "desk") return desk_profile();
  if (profile == "paper") return paper_profile();
  throw ConfigError(fmt::format("unknown profile '{}' (expected desk or paper)", profile));
}

void merge_config(json& base, const json& overlay, const std::string& prefix) {
  if (!overlay.is_object()) throw ConfigError("config overlay must be a JSON object");
  for (const auto& [key, value] : overlay.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError(fmt::format("unknown config key '{}'", path));
    json& slot = base[key];
    if (slot.is_object()) {
      if (!value.is_object()) throw ConfigError(fmt::format("config key '{}' must be an object", path));
      merge_config(slot, value, path);
    } else if (!same_kind(slot, value)) {
      throw ConfigError(fmt::format("config key '{}' expects {}, got {}", path, type_name(slot), type_name(value)));
    } else {
      slot = value;
    }
  }
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(fmt::format("override '{}' is not key=value", assignment));
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json overlay = value;
  std::vector<std::string> parts;
  for (std::size_t start = 0;;) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) overlay = json{{*it, overlay}};
  merge_config(config, overlay);
}

json resolve_config(const ConfigSources& sources) {
  json file_cfg;
  if (sources.file) {
    std::ifstream in(*sources.file);
    if (!in) throw IoError(fmt::format("cannot read config file {}", sources.file->string()));
    file_cfg = json::parse(in, nullptr, false);
    if (file_cfg.is_discarded() || !file_cfg.is_object()) {
      throw ConfigError(fmt::format("config file {} is not a JSON object", sources.file->string()));
    }
  }
  std::string profile = "desk";
  if (sources.profile) {
    profile = *sources.profile;
  } else if (file_cfg.contains("profile") && file_cfg["profile"].is_string()) {
    profile = file_cfg["profile"].get<std::string>();
  }
  json cfg = profile_defaults(profile);
  if (!file_cfg.is_null()) {
    file_cfg.erase("profile");
    merge_config(cfg, file_cfg);
  }
  for (const auto& o : sources.overrides) apply_override(cfg, o);
  if (sources.seed) cfg["seed"] = *sources.seed;
  cfg["profile"] = profile;

  // Validate every typed view once so that bad values fail before any work.
  preprocess_from(cfg).validate();
  student_spec_from(cfg).validate();
  teacher_spec_from(cfg).validate();
  cfa_from(cfg).validate();
  supervised_from(cfg).validate();
  skd_from(cfg).validate();
  ier_from(cfg);
  return cfg;
}

std::filesystem::path default_run_root() {
  if (const char* root = std::getenv("AESKD_RUN_ROOT"); root && *root) return root;
  return std::filesystem::current_path() / "runs";
}

std::filesystem::path prepare_run_dir(const json& config, const std::string& command) {
  std::filesystem::path dir = config.at("run_dir").get<std::string>();
  if (dir.empty()) {
    dir = default_run_root() / fmt::format("{}-{}", command, config.at("seed").get<std::uint64_t>());
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create run directory {}: {}", dir.string(), ec.message()));
  json stored = config;
  stored["run_dir"] = dir.string();
  std::ofstream out(dir / "config.json");
  if (!out) throw IoError(fmt::format("cannot write {}", (dir / "config.json").string()));
  out << stored.dump(2) << '\n';
  return dir;
}

PreprocessSpec preprocess_from(const json& config) {
  const auto& p = config.at("preprocess");
  PreprocessSpec s;
  s.resize = p.at("resize").get<int>();
  s.crop = p.at("crop").get<int>();
  s.hflip_prob = p.at("hflip_prob").get<double>();
  s.seed = config.at("seed").get<std::uint64_t>();
  s.mean = triple(p.at("mean"), "preprocess.mean");
  s.std = triple(p.at("std"), "preprocess.std");
  return s;
}

std::array<double, 3> teacher_mean_from(const json& config) {
  return triple(config.at("teacher_preprocess").at("mean"), "teacher_preprocess.mean");
}

std::array<double, 3> teacher_std_from(const json& config) {
  return triple(config.at("teacher_preprocess").at("std"), "teacher_preprocess.std");
}

EncoderSpec student_spec_from(const json& config) {
  return encoder_from(config.at("student"), config.at("preprocess").at("crop").get<std::size_t>());
}

EncoderSpec teacher_spec_from(const json& config) {
  return encoder_from(config.at("teacher"), config.at("preprocess").at("crop").get<std::size_t>());
}

HeadSpec head_spec_from(const json& config) {
  HeadSpec h;
  h.hidden = config.at("head").at("hidden").get<std::vector<std::size_t>>();
  h.bins = config.at("head").at("bins").get<std::size_t>();
  return h;
}

ScheduleConfig schedule_from(const json& config) {
  const auto& s = config.at("schedule");
  ScheduleConfig c;
  c.lr = s.at("lr").get<double>();
  c.decay_factor = s.at("decay_factor").get<double>();
  c.decay_epochs = s.at("decay_epochs").get<std::vector<std::size_t>>();
  c.total_epochs = s.at("total_epochs").get<std::size_t>();
  return c;
}

nn::AdamConfig adam_from(const json& config) {
  const auto& o = config.at("optimizer");
  nn::AdamConfig a;
  a.lr = config.at("schedule").at("lr").get<double>();
  a.beta1 = o.at("beta1").get<double>();
  a.beta2 = o.at("beta2").get<double>();
  a.eps = o.at("eps").get<double>();
  return a;
}

namespace {

std::optional<double> grad_clip_from(const json& config) {
  const double clip = config.at("optimizer").at("grad_clip").get<double>();
  if (clip < 0.0) throw ConfigError("optimizer.grad_clip must be >= 0 (0 disables clipping)");
  if (clip == 0.0) return std::nullopt;
  return clip;
}

EmdConfig emd_from(const json& config) {
  EmdConfig e;
  e.r = config.at("emd").at("r").get<double>();
  e.d = config.at("head").at("bins").get<std::size_t>();
  return e;
}

}  // namespace

CfaConfig cfa_from(const json& config) {
  const auto& c = config.at("cfa");
  CfaConfig cfg;
  cfg.schedule = schedule_from(config);
  cfg.batch_size = c.at("batch_size").get<std::size_t>();
  cfg.adam = adam_from(config);
  cfg.alignment.epsilon = c.at("epsilon").get<double>();
  const auto source = c.at("teacher_source").get<std::string>();
  if (source == "cache") {
    cfg.teacher_source = TeacherSourceKind::cache;
  } else if (source == "live") {
    cfg.teacher_source = TeacherSourceKind::live;
  } else {
    throw ConfigError(fmt::format("cfa.teacher_source: unknown value '{}' (expected cache or live)", source));
  }
  cfg.grad_clip = grad_clip_from(config);
  cfg.seed = config.at("seed").get<std::uint64_t>();
  return cfg;
}

Discretization discretization_from(const json& config) {
  return parse_discretization(config.at("labels").at("discretization").get<std::string>());
}

SupervisedConfig supervised_from(const json& config) {
  SupervisedConfig cfg;
  cfg.schedule = schedule_from(config);
  cfg.batch_size = config.at("finetune").at("batch_size").get<std::size_t>();
  cfg.emd = emd_from(config);
  cfg.discretization = discretization_from(config);
  cfg.adam = adam_from(config);
  cfg.grad_clip = grad_clip_from(config);
  cfg.seed = config.at("seed").get<std::uint64_t>();
  return cfg;
}

SkdRunConfig skd_from(const json& config) {
  const auto& s = config.at("skd");
  SkdRunConfig cfg;
  cfg.schedule = schedule_from(config);
  cfg.loss.beta = s.at("beta").get<double>();
  cfg.loss.mu = s.at("mu").get<std::size_t>();
  cfg.plan.b_s = s.at("b_s").get<std::size_t>();
  cfg.plan.mu = cfg.loss.mu;
  cfg.emd = emd_from(config);
  cfg.discretization = discretization_from(config);
  cfg.adam = adam_from(config);
  cfg.grad_clip = grad_clip_from(config);
  cfg.seed = config.at("seed").get<std::uint64_t>();
  return cfg;
}

IerConfig ier_from(const json& config) {
  const auto& e = config.at("eval");
  IerConfig c;
  c.intervals = e.at("intervals").get<std::size_t>();
  c.tolerance = e.at("tolerance").get<double>();
  c.lo = e.at("score_lo").get<double>();
  c.hi = e.at("score_hi").get<double>();
  c.validate();
  return c;
}

}  // namespace aeskd
