// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "aeskd/config.hpp"
#include "commands.hpp"

namespace {

using aeskd::ConfigSources;
namespace fs = std::filesystem;

void add_config_flags(CLI::App* cmd, ConfigSources& src) {
  cmd->add_option("--profile", src.profile, "defaults profile: desk or paper");
  cmd->add_option("--config", src.file, "JSON config file layered over the profile");
  cmd->add_option("--set", src.overrides, "override, key=value (repeatable)");
  cmd->add_option("--seed", src.seed, "run seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aeskd: feature alignment and semi-supervised distillation for aesthetics scoring"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  aeskd::cli::MakeManifestOptions mm;
  auto* make_manifest = app.add_subcommand("make-manifest", "build a manifest from image folders or merge manifests");
  make_manifest->add_option("--dir", mm.dirs, "image directory (repeatable)");
  make_manifest->add_option("--source", mm.sources, "source name per --dir");
  make_manifest->add_option("--labels", mm.labels, "CSV of id,score or id,p_1..p_d");
  make_manifest->add_option("--merge", mm.merge, "manifest to merge (repeatable)");
  make_manifest->add_option("--bins", mm.bins, "number of score bins (values 1..d)");
  make_manifest->add_option("--out", mm.out, "output manifest")->required();

  aeskd::cli::SynthOptions so;
  auto* synth = app.add_subcommand("synth", "generate the synthetic scoring task");
  synth->add_option("--out", so.out, "output directory")->required();
  synth->add_option("--n", so.n, "labeled images");
  synth->add_option("--unlabeled", so.unlabeled, "images in the unlabeled twin");
  synth->add_option("--size", so.image_size, "image side in pixels");
  synth->add_option("--seed", so.seed, "generator seed");
  synth->add_option("--noise", so.noise, "label noise std");
  synth->add_option("--spread", so.spread, "label bump width");
  synth->add_option("--source", so.source, "source tag");

  ConfigSources train_src;
  std::optional<fs::path> resume;
  std::optional<std::uint64_t> max_steps;
  std::vector<CLI::App*> trainers;
  for (const char* name : {"cfa", "finetune-teacher", "skd"}) {
    auto* cmd = app.add_subcommand(name, name == std::string("cfa")               ? "feature alignment to a frozen encoder"
                                         : name == std::string("finetune-teacher") ? "supervised EMD fine-tuning"
                                                                                   : "semi-supervised distillation");
    add_config_flags(cmd, train_src);
    cmd->add_option("--resume", resume, "epoch checkpoint to continue from");
    cmd->add_option("--max-steps", max_steps, "stop after this many optimizer steps");
    trainers.push_back(cmd);
  }

  ConfigSources eval_src;
  fs::path checkpoint, out_dir = ".";
  std::optional<fs::path> manifest;
  auto* eval = app.add_subcommand("eval", "metrics and interval error rates of a score model");
  add_config_flags(eval, eval_src);
  eval->add_option("--checkpoint", checkpoint, "score model checkpoint")->required();
  eval->add_option("--manifest", manifest, "labeled eval manifest (default data.eval)");
  eval->add_option("--out", out_dir, "report directory");

  ConfigSources attn_src;
  fs::path before, after;
  auto* attn = app.add_subcommand("attn-report", "attention distance and entropy, before vs after");
  add_config_flags(attn, attn_src);
  attn->add_option("--before", before, "backbone checkpoint")->required();
  attn->add_option("--after", after, "backbone checkpoint")->required();
  attn->add_option("--manifest", manifest, "probe manifest (default data.probe)");
  attn->add_option("--out", out_dir, "report directory");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (make_manifest->parsed()) {
      std::cout << aeskd::cli::cmd_make_manifest(mm).dump(2) << '\n';
    } else if (synth->parsed()) {
      std::cout << aeskd::cli::cmd_synth(so).dump(2) << '\n';
    } else if (eval->parsed()) {
      const auto report = aeskd::cli::cmd_eval({aeskd::resolve_config(eval_src), checkpoint, manifest, out_dir});
      std::cout << report.at("metrics").dump(2) << '\n';
    } else if (attn->parsed()) {
      aeskd::cli::cmd_attn_report({aeskd::resolve_config(attn_src), before, after, manifest, out_dir});
      std::cout << (out_dir / "attention_report.json").string() << '\n';
    } else {
      aeskd::cli::TrainOptions opts{aeskd::resolve_config(train_src), resume, max_steps};
      fs::path run_dir;
      if (trainers[0]->parsed()) {
        run_dir = aeskd::cli::cmd_cfa(opts);
      } else if (trainers[1]->parsed()) {
        run_dir = aeskd::cli::cmd_finetune_teacher(opts);
      } else {
        run_dir = aeskd::cli::cmd_skd(opts);
      }
      std::cout << run_dir.string() << '\n';
    }
  } catch (const aeskd::Error& e) {
    spdlog::error("{} error: {}", aeskd::to_string(e.kind()), e.what());
    return aeskd::cli::exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    spdlog::error("config error: {}", e.what());
    return aeskd::cli::exit_code(aeskd::ErrorKind::config);
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("io error: {}", e.what());
    return aeskd::cli::exit_code(aeskd::ErrorKind::io);
  }
  return 0;
}
