// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "aeskd/config.hpp"
#include "aeskd/errors.hpp"
#include "support.hpp"

using namespace aeskd;
using nlohmann::json;
using testutil::TempDir;

namespace {

std::string config_error(const ConfigSources& src) {
  try {
    resolve_config(src);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, ProfilesResolve) {
  for (const char* p : {"desk", "paper"}) {
    ConfigSources src;
    src.profile = p;
    const auto cfg = resolve_config(src);
    EXPECT_EQ(cfg["profile"], p);
  }
  EXPECT_NE(config_error({std::string("huge"), {}, {}, {}}).find("huge"), std::string::npos);
}

TEST(Config, PaperProfileCarriesPublishedHyperparameters) {
  ConfigSources src;
  src.profile = "paper";
  const auto cfg = resolve_config(src);
  const auto pre = preprocess_from(cfg);
  EXPECT_EQ(pre.resize, 256);
  EXPECT_EQ(pre.crop, 224);
  EXPECT_DOUBLE_EQ(pre.hflip_prob, 0.5);
  const auto sched = schedule_from(cfg);
  EXPECT_DOUBLE_EQ(sched.lr, 1e-4);
  EXPECT_DOUBLE_EQ(sched.decay_factor, 0.1);
  EXPECT_EQ(sched.decay_epochs, std::vector<std::size_t>{5});
  EXPECT_EQ(sched.total_epochs, 16u);
  const auto skd = skd_from(cfg);
  EXPECT_DOUBLE_EQ(skd.loss.beta, 15.0);
  EXPECT_EQ(skd.loss.mu, 15u);
  EXPECT_EQ(skd.plan.mu, 15u);
  EXPECT_FALSE(cfa_from(cfg).grad_clip.has_value());
  EXPECT_DOUBLE_EQ(ier_from(cfg).tolerance, 0.5);
}

TEST(Config, LayeringOrder) {
  TempDir dir;
  std::ofstream(dir / "c.json") << R"({"schedule": {"lr": 0.5, "total_epochs": 7}, "seed": 3})";
  ConfigSources src;
  src.file = dir / "c.json";
  src.overrides = {"schedule.lr=0.25", "data.labeled=some/file.jsonl", "student.family=tiny-conv"};
  auto cfg = resolve_config(src);
  EXPECT_DOUBLE_EQ(cfg["schedule"]["lr"].get<double>(), 0.25);
  EXPECT_EQ(cfg["schedule"]["total_epochs"], 7);
  EXPECT_EQ(cfg["seed"], 3);
  EXPECT_EQ(cfg["data"]["labeled"], "some/file.jsonl");
  EXPECT_EQ(student_spec_from(cfg).family, EncoderFamily::tiny_conv);
  src.seed = 9;
  cfg = resolve_config(src);
  EXPECT_EQ(cfg["seed"], 9);
  EXPECT_EQ(preprocess_from(cfg).seed, 9u);
}

TEST(Config, UnknownKeysAreNamed) {
  ConfigSources src;
  src.overrides = {"schedule.lrr=1"};
  EXPECT_NE(config_error(src).find("schedule.lrr"), std::string::npos);
  TempDir dir;
  std::ofstream(dir / "c.json") << R"({"cfa": {"batch": 3}})";
  ConfigSources file;
  file.file = dir / "c.json";
  EXPECT_NE(config_error(file).find("cfa.batch"), std::string::npos);
}

TEST(Config, TypeAndValueErrors) {
  ConfigSources src;
  src.overrides = {"cfa.batch_size=1.5"};
  EXPECT_NE(config_error(src).find("cfa.batch_size"), std::string::npos);
  src.overrides = {"preprocess=3"};
  EXPECT_FALSE(config_error(src).empty());
  src.overrides = {"skd.b_s=0"};
  EXPECT_FALSE(config_error(src).empty());
  src.overrides = {"cfa.teacher_source=remote"};
  EXPECT_NE(config_error(src).find("remote"), std::string::npos);
  src.overrides = {"noequals"};
  EXPECT_FALSE(config_error(src).empty());
  // Integers are accepted where a float is expected.
  src.overrides = {"schedule.lr=1"};
  EXPECT_EQ(config_error(src), "");
}

TEST(Config, RunDirGetsResolvedConfigAndReplays) {
  TempDir root;
  ::setenv("AESKD_RUN_ROOT", root.path().c_str(), 1);
  ConfigSources src;
  src.seed = 4;
  src.overrides = {"schedule.total_epochs=2"};
  const auto cfg = resolve_config(src);
  const auto dir = prepare_run_dir(cfg, "cfa");
  ::unsetenv("AESKD_RUN_ROOT");
  EXPECT_EQ(dir, root.path() / "cfa-4");
  ASSERT_TRUE(std::filesystem::exists(dir / "config.json"));

  ConfigSources replay;
  replay.file = dir / "config.json";
  auto again = resolve_config(replay);
  auto stored = cfg;
  stored["run_dir"] = dir.string();
  EXPECT_EQ(again, stored);
}
