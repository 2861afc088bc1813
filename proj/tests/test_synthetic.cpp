// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>

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

}  // namespace

TEST(Synthetic, SameSpecGivesIdenticalFiles) {
  TempDir a, b;
  SyntheticSpec spec;
  spec.n = 10;
  spec.unlabeled_n = 4;
  spec.seed = 5;
  spec.image_size = 24;
  generate_synthetic(spec, a.path());
  generate_synthetic(spec, b.path());
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path());
    EXPECT_EQ(read_bytes(e.path()), read_bytes(b.path() / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 10u + 4u + 2u);
}

TEST(Synthetic, LabelsRecomputeFromSavedImages) {
  TempDir dir;
  SyntheticSpec spec;
  spec.n = 40;
  spec.seed = 6;
  spec.label_noise = 0.3;
  const auto ds = generate_synthetic(spec, dir.path());
  const auto manifest = read_manifest(dir / "labeled.jsonl");
  ASSERT_EQ(manifest.size(), 40u);
  for (const auto& r : manifest.records) {
    const auto img = decode_image(manifest.resolve(r));
    ASSERT_TRUE(img);
    const auto expected = label_from_image(*img, r.id, spec);
    const auto& stored = std::get<ScoreDistribution>(*r.label);
    EXPECT_EQ(stored, expected) << r.id;
  }
}

TEST(Synthetic, NoiseFreeLabelsDependOnlyOnLatent) {
  SyntheticSpec spec;
  spec.label_noise = 0.0;
  EXPECT_EQ(label_noise_offset(spec, "anything"), 0.0);
  const auto img = render_synthetic_image(spec, 3, 0);
  EXPECT_EQ(label_from_image(img, "a", spec), label_from_image(img, "b", spec));
  EXPECT_EQ(label_from_image(img, "a", spec), label_from_latent(latent_score(img, spec.bin_values), spec));
  spec.label_noise = 0.5;
  EXPECT_NE(label_noise_offset(spec, "a"), label_noise_offset(spec, "b"));
}

TEST(Synthetic, LatentIsSpreadAndImbalanced) {
  SyntheticSpec spec;
  spec.image_size = 32;
  std::vector<double> latents;
  for (std::size_t i = 0; i < 400; ++i) latents.push_back(latent_score(render_synthetic_image(spec, i, 0), spec.bin_values));
  double mean = 0.0;
  for (double v : latents) mean += v;
  mean /= static_cast<double>(latents.size());
  double var = 0.0;
  std::size_t tails = 0, middle = 0;
  for (double v : latents) {
    var += (v - mean) * (v - mean);
    tails += v < 2.8 || v > 8.2;
    middle += v >= 4.0 && v <= 7.0;
  }
  var /= static_cast<double>(latents.size());
  EXPECT_GT(std::sqrt(var), 0.5);
  EXPECT_GT(middle, 2 * tails);
  EXPECT_GT(mean, 4.0);
  EXPECT_LT(mean, 7.0);
}

TEST(Synthetic, UnlabeledTwinIsDisjoint) {
  TempDir dir;
  SyntheticSpec spec;
  spec.n = 5;
  spec.unlabeled_n = 5;
  const auto ds = generate_synthetic(spec, dir.path());
  EXPECT_FALSE(ds.unlabeled.labeled);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NE(ds.labeled.records[i].id, ds.unlabeled.records[i].id);
    EXPECT_NE(render_synthetic_image(spec, i, 0), render_synthetic_image(spec, i, 1));
  }
}

TEST(Synthetic, EveryLabelIsValid) {
  SyntheticSpec spec;
  spec.spread = 0.3;
  for (double latent : {1.0, 1.01, 5.5, 9.99, 10.0}) {
    const auto d = label_from_latent(latent, spec);
    double s = 0.0;
    for (double v : d.probs()) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  spec.n = 0;
  EXPECT_THROW(spec.validate(), ConfigError);
}
