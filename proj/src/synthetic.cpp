// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "aeskd/errors.hpp"
#include "aeskd/rng.hpp"

namespace aeskd {

namespace {

constexpr std::uint64_t kLabeledStream = 1;
constexpr std::uint64_t kUnlabeledStream = 2;
constexpr std::uint64_t kNoiseStream = 3;

double unit(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

double gaussian(std::mt19937_64& gen) {
  // Box-Muller keeps the draw identical across standard libraries.
  const double u1 = std::max(unit(gen), 1e-300);
  const double u2 = unit(gen);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n == 0) throw ConfigError("synthetic dataset needs n >= 1");
  if (image_size < 4) throw ConfigError("synthetic images must be at least 4x4");
  if (!(label_noise >= 0.0)) throw ConfigError("label noise must be >= 0");
  if (!(spread > 0.0)) throw ConfigError("label spread must be positive");
  validate_bin_values(bin_values);
}

double latent_score(const Raster& image, std::span<const double> bin_values) {
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  if (n == 0 || image.channels != 3) throw ArgumentError("latent score needs a non-empty RGB raster");
  double sum = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto* px = &image.pixels[i * 3];
    const double l = (0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]) / 255.0;
    sum += l;
    sq += l * l;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
  const double u = 0.6 * mean + 1.2 * std::sqrt(var);
  return std::clamp(1.0 + 9.0 * u, bin_values.front(), bin_values.back());
}

double label_noise_offset(const SyntheticSpec& spec, const std::string& id) {
  if (spec.label_noise == 0.0) return 0.0;
  std::mt19937_64 gen(mix_seed({spec.seed, kNoiseStream, fnv1a(id)}));
  return spec.label_noise * gaussian(gen);
}

ScoreDistribution label_from_latent(double latent, const SyntheticSpec& spec) {
  std::vector<double> w(spec.bin_values.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double z = (spec.bin_values[i] - latent) / spec.spread;
    w[i] = std::exp(-0.5 * z * z);
  }
  return ScoreDistribution::normalized(w, spec.bin_values);
}

ScoreDistribution label_from_image(const Raster& image, const std::string& id, const SyntheticSpec& spec) {
  const double latent = std::clamp(latent_score(image, spec.bin_values) + label_noise_offset(spec, id),
                                   spec.bin_values.front(), spec.bin_values.back());
  return label_from_latent(latent, spec);
}

Raster render_synthetic_image(const SyntheticSpec& spec, std::size_t index, std::uint64_t stream) {
  std::mt19937_64 gen(mix_seed({spec.seed, stream, index}));
  const double brightness = std::clamp(0.5 + 0.15 * gaussian(gen), 0.1, 0.9);
  const double contrast = std::clamp(0.17 + 0.07 * gaussian(gen), 0.02, 0.4);
  const double angle = std::numbers::pi * unit(gen);
  const double cycles = 1.0 + 2.0 * unit(gen);
  const double phase = 2.0 * std::numbers::pi * unit(gen);
  std::array<double, 3> tint{};
  for (auto& t : tint) t = 0.08 * (unit(gen) - 0.5);
  const double noise = 0.02;

  Raster out;
  out.width = spec.image_size;
  out.height = spec.image_size;
  out.channels = 3;
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  const double freq = 2.0 * std::numbers::pi * cycles / spec.image_size;
  const double ca = std::cos(angle);
  const double sa = std::sin(angle);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const double wave = std::sin(freq * (ca * x + sa * y) + phase);
      for (int c = 0; c < 3; ++c) {
        const double v = brightness + tint[c] + contrast * std::sqrt(2.0) * wave + noise * gaussian(gen);
        out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      }
    }
  }
  return out;
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  const auto image_dir = out_dir / "images";
  std::filesystem::create_directories(image_dir);

  SyntheticDataset ds;
  ds.labeled.labeled = true;
  ds.labeled.bin_values = spec.bin_values;
  ds.labeled.score_lo = spec.bin_values.front();
  ds.labeled.score_hi = spec.bin_values.back();
  ds.labeled.base_dir = out_dir;
  ds.unlabeled.labeled = false;
  ds.unlabeled.bin_values = spec.bin_values;
  ds.unlabeled.score_lo = ds.labeled.score_lo;
  ds.unlabeled.score_hi = ds.labeled.score_hi;
  ds.unlabeled.base_dir = out_dir;

  for (std::size_t i = 0; i < spec.n; ++i) {
    const auto id = fmt::format("{}_{:05d}", spec.source, i);
    const auto image = render_synthetic_image(spec, i, kLabeledStream);
    const auto rel = std::filesystem::path("images") / (id + ".png");
    write_png(out_dir / rel, image);
    ds.labeled.records.push_back({id, rel.string(), spec.source, label_from_image(image, id, spec)});
  }
  for (std::size_t i = 0; i < spec.unlabeled_n; ++i) {
    const auto id = fmt::format("{}_u{:05d}", spec.source, i);
    const auto rel = std::filesystem::path("images") / (id + ".png");
    write_png(out_dir / rel, render_synthetic_image(spec, i, kUnlabeledStream));
    ds.unlabeled.records.push_back({id, rel.string(), spec.source, std::nullopt});
  }
  write_manifest(out_dir / "labeled.jsonl", ds.labeled);
  if (spec.unlabeled_n > 0) write_manifest(out_dir / "unlabeled.jsonl", ds.unlabeled);
  return ds;
}

}  // namespace aeskd
