// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aeskd/image.hpp"
#include "aeskd/manifest.hpp"
#include "aeskd/score_dist.hpp"

namespace aeskd {

/// Desk-scale stand-in for an aesthetics benchmark.
///
/// Each image is a tinted sinusoidal stripe pattern over a flat base. Its
/// label derives from the saved 8-bit pixels by a closed-form rule:
///
///   L      = (0.299 R + 0.587 G + 0.114 B) / 255     per pixel
///   latent = clamp(1 + 9 * (0.6 * mean(L) + 1.2 * std(L)), lo, hi)
///   latent += label_noise * N(0, 1)   (drawn from (seed, id); then clamped)
///   label  = normalized exp(-(v_i - latent)^2 / (2 * spread^2)) over bins v_i
///
/// Brightness and contrast are drawn so the latent score is Gaussian-like
/// around the middle of the scale with thin tails.
struct SyntheticSpec {
  std::size_t n = 256;            // labeled images
  std::size_t unlabeled_n = 0;    // images in the unlabeled twin (disjoint draws)
  int image_size = 48;
  std::uint64_t seed = 0;
  double label_noise = 0.0;
  double spread = 1.0;
  std::vector<double> bin_values = default_bin_values();
  std::string source = "synthetic";

  void validate() const;
};

struct SyntheticDataset {
  Manifest labeled;
  Manifest unlabeled;
};

/// Luminance statistics -> latent score, before noise.
double latent_score(const Raster& image, std::span<const double> bin_values);
/// Zero when label_noise is zero; otherwise a deterministic draw per (seed, id).
double label_noise_offset(const SyntheticSpec& spec, const std::string& id);
ScoreDistribution label_from_latent(double latent, const SyntheticSpec& spec);
/// The full published rule applied to a decoded image.
ScoreDistribution label_from_image(const Raster& image, const std::string& id, const SyntheticSpec& spec);

/// Renders one image; pure function of (spec, index, stream).
Raster render_synthetic_image(const SyntheticSpec& spec, std::size_t index, std::uint64_t stream);

/// Writes images under out_dir/images and the manifests labeled.jsonl and
/// (when unlabeled_n > 0) unlabeled.jsonl. Uris are relative to out_dir.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace aeskd
