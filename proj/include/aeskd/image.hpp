// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace aeskd {

/// 8-bit interleaved (HWC, RGB) raster.
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool empty() const noexcept { return pixels.empty(); }
  friend bool operator==(const Raster&, const Raster&) = default;
};

/// Normalized network input, planar CHW.
struct ImageTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;
};

/// Returns nullopt when the file is missing or cannot be decoded. Always
/// yields 3-channel RGB.
std::optional<Raster> decode_image(const std::filesystem::path& path);
/// Lossless PNG. Throws IoError on failure.
void write_png(const std::filesystem::path& path, const Raster& raster);

enum class PreprocessMode { train, eval };

struct PreprocessSpec {
  int resize = 256;
  int crop = 224;
  double hflip_prob = 0.5;
  PreprocessMode mode = PreprocessMode::train;
  std::uint64_t seed = 0;
  std::array<double, 3> mean{0.485, 0.456, 0.406};
  std::array<double, 3> std{0.229, 0.224, 0.225};

  void validate() const;
  /// Stable digest of every field that changes pixel output.
  std::string fingerprint() const;
};

/// Crop origin and flip for one sample view.
struct ViewDraw {
  int crop_y = 0;
  int crop_x = 0;
  bool flip = false;
};

/// Seed of the view of `sample_id` in `epoch`; the same triple always yields
/// the same crop and flip.
std::uint64_t view_seed(std::uint64_t seed, std::uint64_t epoch, const std::string& sample_id);

/// Train mode: uniform crop origin, flip with hflip_prob. Eval mode: centre
/// crop, no flip (the seed is ignored).
ViewDraw draw_view(const PreprocessSpec& spec, std::uint64_t draw_seed);

/// Square resize to spec.resize (bilinear).
Raster resize_square(const Raster& image, int size);

/// Crop and optional flip of an already resized raster.
Raster apply_view(const Raster& resized, int crop, const ViewDraw& view);

/// (x/255 - mean[c]) / std[c]
ImageTensor normalize(const Raster& view, const std::array<double, 3>& mean,
                      const std::array<double, 3>& std);

/// resize -> crop -> flip -> normalize; output is always crop x crop.
ImageTensor preprocess(const Raster& image, const PreprocessSpec& spec, std::uint64_t draw_seed);

}  // namespace aeskd
