// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include "aeskd/checkpoint.hpp"
#include "aeskd/errors.hpp"
#include "aeskd/synthetic.hpp"
#include "support.hpp"

using namespace aeskd;
using testutil::TempDir;

namespace {

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

EncoderSpec small_spec() {
  EncoderSpec s;
  s.image_size = 16;
  s.width = 8;
  s.mlp_hidden = 8;
  s.feature_dim = 8;
  return s;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  TempDir dir;
  ScoreModel model(make_encoder(small_spec(), 1), HeadSpec{{6}, 10}, 2);
  Checkpoint ckpt;
  ckpt.meta["note"] = "x";
  store_score_model(ckpt, model);
  save_checkpoint(dir / "a.ckpt", ckpt);
  const auto back = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(back.meta["note"], "x");
  auto restored = load_score_model(back);
  EXPECT_EQ(nn::parameter_hash(restored->parameters()), nn::parameter_hash(model.parameters()));
  EXPECT_EQ(restored->head_spec(), model.head_spec());
  save_checkpoint(dir / "b.ckpt", back);
  EXPECT_EQ(read_bytes(dir / "a.ckpt"), read_bytes(dir / "b.ckpt"));
  for (const auto& e : std::filesystem::directory_iterator(dir.path())) {
    EXPECT_EQ(e.path().extension(), ".ckpt") << "leftover " << e.path();
  }
}

TEST(Checkpoint, BackboneAndProjector) {
  TempDir dir;
  auto spec = small_spec();
  spec.family = EncoderFamily::tiny_conv;
  ProjectedEncoder pe(make_encoder(spec, 3), {8, 12, 12}, 4);
  Checkpoint ckpt;
  store_backbone(ckpt, pe.backbone());
  store_projector(ckpt, pe.projector());
  save_checkpoint(dir / "p.ckpt", ckpt);
  const auto back = load_checkpoint(dir / "p.ckpt");
  auto enc = load_backbone(back);
  EXPECT_EQ(enc->spec(), spec);
  EXPECT_EQ(nn::parameter_hash(enc->parameters()), nn::parameter_hash(pe.backbone().parameters()));
  ProjectedEncoder other(make_encoder(spec, 5), {8, 12, 12}, 6);
  restore_projector(back, other.projector());
  EXPECT_EQ(nn::parameter_hash(other.projector().parameters()), nn::parameter_hash(pe.projector().parameters()));
}

TEST(Checkpoint, CorruptionIsDetected) {
  TempDir dir;
  ScoreModel model(make_encoder(small_spec(), 1), HeadSpec{{6}, 10}, 2);
  Checkpoint ckpt;
  store_score_model(ckpt, model);
  save_checkpoint(dir / "a.ckpt", ckpt);
  const auto bytes = read_bytes(dir / "a.ckpt");
  std::ofstream(dir / "trunc.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() - 100);
  EXPECT_THROW(load_checkpoint(dir / "trunc.ckpt"), IntegrityError);
  std::ofstream(dir / "magic.ckpt", std::ios::binary) << "XXXXXXXX" << bytes.substr(8);
  EXPECT_THROW(load_checkpoint(dir / "magic.ckpt"), IntegrityError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IoError);

  Checkpoint partial = ckpt;
  partial.tensors.erase(partial.tensors.begin());
  EXPECT_THROW(load_score_model(partial), IntegrityError);
}

TEST(FeatureCache, RoundTripAndReuse) {
  TempDir dir;
  SyntheticSpec ss;
  ss.n = 6;
  ss.image_size = 20;
  const auto ds = generate_synthetic(ss, dir / "data");
  auto spec = small_spec();
  FrozenEncoder teacher(make_encoder(spec, 9), "t");
  PreprocessSpec ps;
  ps.resize = 18;
  ps.crop = 16;
  ImageLoader loader;
  const auto cache = load_or_build_feature_cache(dir / "f.cache", teacher, ds.labeled, loader, ps);
  EXPECT_EQ(cache.size(), 6u);
  EXPECT_EQ(cache.feature_dim, 8u);
  const auto stamp = std::filesystem::last_write_time(dir / "f.cache");
  const auto again = load_or_build_feature_cache(dir / "f.cache", teacher, ds.labeled, loader, ps);
  EXPECT_EQ(again.features, cache.features);
  EXPECT_EQ(std::filesystem::last_write_time(dir / "f.cache"), stamp);

  // Same features a second time from scratch: eval-mode preprocessing.
  const auto fresh = cache_features(teacher, ds.labeled, loader, ps);
  EXPECT_EQ(fresh.features, cache.features);
  EXPECT_THROW(cache.at("nope"), ArgumentError);

  // Re-encode five ids one at a time, straight from the files.
  auto eval_ps = ps;
  eval_ps.mode = PreprocessMode::eval;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& r = ds.labeled.records[i];
    const auto raster = decode_image(ds.labeled.resolve(r));
    ASSERT_TRUE(raster);
    const std::vector<ImageTensor> one{preprocess(*raster, eval_ps, 0)};
    const nn::Matrix f = teacher.encode(one);
    const auto& cached = cache.at(r.id);
    ASSERT_EQ(cached.size(), static_cast<std::size_t>(f.cols()));
    for (std::size_t k = 0; k < cached.size(); ++k) EXPECT_NEAR(cached[k], f(0, static_cast<Eigen::Index>(k)), 1e-6);
  }
}

TEST(FeatureCache, DifferentTeacherRebuilds) {
  TempDir dir;
  SyntheticSpec ss;
  ss.n = 4;
  ss.image_size = 20;
  const auto ds = generate_synthetic(ss, dir / "data");
  PreprocessSpec ps;
  ps.resize = 18;
  ps.crop = 16;
  ImageLoader loader;
  FrozenEncoder a(make_encoder(small_spec(), 1), "t");
  FrozenEncoder b(make_encoder(small_spec(), 2), "t");
  const auto ca = load_or_build_feature_cache(dir / "f.cache", a, ds.labeled, loader, ps);
  const auto cb = load_or_build_feature_cache(dir / "f.cache", b, ds.labeled, loader, ps);
  EXPECT_NE(ca.teacher_id, cb.teacher_id);
  EXPECT_NE(ca.features, cb.features);
  EXPECT_EQ(load_feature_cache(dir / "f.cache").teacher_id, b.teacher_id());
}

TEST(FeatureCache, TamperedHeaderIsRejected) {
  TempDir dir;
  FeatureCache c;
  c.teacher_id = "teacher-a";
  c.preprocess_fingerprint = "p";
  c.feature_dim = 2;
  c.features["x"] = {1.0, 2.0};
  save_feature_cache(dir / "c.cache", c);
  auto bytes = read_bytes(dir / "c.cache");
  const auto pos = bytes.find("teacher-a");
  ASSERT_NE(pos, std::string::npos);
  bytes[pos + 8] = 'b';
  std::ofstream(dir / "c.cache", std::ios::binary) << bytes;
  EXPECT_THROW(load_feature_cache(dir / "c.cache"), IntegrityError);
}
