// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/image.hpp"

#include <algorithm>
#include <random>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "aeskd/errors.hpp"
#include "aeskd/rng.hpp"

namespace aeskd {

std::optional<Raster> decode_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  cv::Mat bgr;
  try {
    bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception&) {
    return std::nullopt;
  }
  if (bgr.empty()) return std::nullopt;
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  Raster out;
  out.width = rgb.cols;
  out.height = rgb.rows;
  out.channels = 3;
  out.pixels.resize(static_cast<std::size_t>(rgb.total()) * 3);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<std::uint8_t>(y);
    std::copy(row, row + rgb.cols * 3, out.pixels.begin() + static_cast<std::ptrdiff_t>(y) * rgb.cols * 3);
  }
  return out;
}

void write_png(const std::filesystem::path& path, const Raster& raster) {
  if (raster.channels != 3) throw ArgumentError("write_png expects an RGB raster");
  cv::Mat rgb(raster.height, raster.width, CV_8UC3, const_cast<std::uint8_t*>(raster.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), bgr);
  } catch (const cv::Exception& e) {
    throw IoError(fmt::format("cannot write {}: {}", path.string(), e.what()));
  }
  if (!ok) throw IoError(fmt::format("cannot write {}", path.string()));
}

void PreprocessSpec::validate() const {
  if (resize < 1 || crop < 1) throw ConfigError("preprocess sizes must be positive");
  if (crop > resize) throw ConfigError(fmt::format("crop {} exceeds resize {}", crop, resize));
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) throw ConfigError("hflip_prob must lie in [0, 1]");
  for (double s : std) {
    if (!(s > 0.0)) throw ConfigError("normalization std must be positive");
  }
}

std::string PreprocessSpec::fingerprint() const {
  return fmt::format("resize={};crop={};hflip={:.17g};mode={};seed={};mean={:.17g},{:.17g},{:.17g};"
                     "std={:.17g},{:.17g},{:.17g}",
                     resize, crop, hflip_prob, mode == PreprocessMode::train ? "train" : "eval",
                     seed, mean[0], mean[1], mean[2], std[0], std[1], std[2]);
}

std::uint64_t view_seed(std::uint64_t seed, std::uint64_t epoch, const std::string& sample_id) {
  return mix_seed({seed, epoch, fnv1a(sample_id)});
}

ViewDraw draw_view(const PreprocessSpec& spec, std::uint64_t draw_seed) {
  const int slack = spec.resize - spec.crop;
  if (spec.mode == PreprocessMode::eval) return {slack / 2, slack / 2, false};
  std::mt19937_64 gen(draw_seed);
  auto uniform_int = [&](int n) { return static_cast<int>(gen() % static_cast<std::uint64_t>(n + 1)); };
  ViewDraw v;
  v.crop_y = uniform_int(slack);
  v.crop_x = uniform_int(slack);
  const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
  v.flip = u < spec.hflip_prob;
  return v;
}

Raster resize_square(const Raster& image, int size) {
  if (image.width < 1 || image.height < 1) throw ArgumentError("cannot resize an empty raster");
  if (image.width == size && image.height == size) return image;
  cv::Mat src(image.height, image.width, CV_8UC(image.channels),
              const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(size, size), 0.0, 0.0, cv::INTER_LINEAR);
  Raster out;
  out.width = size;
  out.height = size;
  out.channels = image.channels;
  out.pixels.assign(dst.data, dst.data + dst.total() * dst.elemSize());
  return out;
}

Raster apply_view(const Raster& resized, int crop, const ViewDraw& view) {
  if (view.crop_y < 0 || view.crop_x < 0 || view.crop_y + crop > resized.height ||
      view.crop_x + crop > resized.width) {
    throw ArgumentError("crop window falls outside the raster");
  }
  Raster out;
  out.width = crop;
  out.height = crop;
  out.channels = resized.channels;
  out.pixels.resize(static_cast<std::size_t>(crop) * crop * resized.channels);
  for (int y = 0; y < crop; ++y) {
    for (int x = 0; x < crop; ++x) {
      const int sx = view.flip ? view.crop_x + crop - 1 - x : view.crop_x + x;
      for (int c = 0; c < resized.channels; ++c) out.at(y, x, c) = resized.at(view.crop_y + y, sx, c);
    }
  }
  return out;
}

ImageTensor normalize(const Raster& view, const std::array<double, 3>& mean,
                      const std::array<double, 3>& std) {
  if (view.channels != 3) throw ShapeError("normalize expects an RGB raster");
  ImageTensor t;
  t.channels = 3;
  t.height = view.height;
  t.width = view.width;
  t.data.resize(static_cast<std::size_t>(3) * view.height * view.width);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < view.height; ++y) {
      for (int x = 0; x < view.width; ++x) {
        t.data[(static_cast<std::size_t>(c) * view.height + y) * view.width + x] =
            (view.at(y, x, c) / 255.0 - mean[c]) / std[c];
      }
    }
  }
  return t;
}

ImageTensor preprocess(const Raster& image, const PreprocessSpec& spec, std::uint64_t draw_seed) {
  spec.validate();
  const auto resized = resize_square(image, spec.resize);
  const auto view = apply_view(resized, spec.crop, draw_view(spec, draw_seed));
  return normalize(view, spec.mean, spec.std);
}

}  // namespace aeskd
