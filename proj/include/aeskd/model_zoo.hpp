// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aeskd/attention.hpp"
#include "aeskd/image.hpp"
#include "aeskd/nn/layers.hpp"
#include "aeskd/score_dist.hpp"

namespace aeskd {

enum class EncoderFamily {
  tiny_transformer,
  tiny_conv,
  external,  // features come from elsewhere (a feature cache); nothing to build
};

struct EncoderSpec {
  EncoderFamily family = EncoderFamily::tiny_transformer;
  std::size_t image_size = 32;
  std::size_t channels = 3;
  // transformer
  std::size_t patch = 8;
  std::size_t depth = 2;
  std::size_t width = 32;
  std::size_t heads = 2;
  std::size_t mlp_hidden = 64;
  // conv: channels of each stride-2 3x3 stage
  std::vector<std::size_t> conv_channels{16, 32};
  /// Length of the output feature (the CLS token, or the pooled conv map),
  /// linearly projected when it differs from the internal width.
  std::size_t feature_dim = 32;

  std::size_t grid() const noexcept { return patch ? image_size / patch : 0; }
  std::size_t tokens() const noexcept { return grid() * grid() + 1; }
  void validate() const;
  std::string fingerprint() const;

  friend bool operator==(const EncoderSpec&, const EncoderSpec&) = default;
};

void to_json(nlohmann::json& j, const EncoderSpec& s);
void from_json(const nlohmann::json& j, EncoderSpec& s);
EncoderFamily parse_family(const std::string& name);
std::string to_string(EncoderFamily family);

/// Image -> feature vector backbone. forward caches activations for the
/// following backward call.
class Encoder {
 public:
  explicit Encoder(EncoderSpec spec) : spec_(std::move(spec)) {}
  virtual ~Encoder() = default;
  Encoder(const Encoder&) = delete;
  Encoder& operator=(const Encoder&) = delete;

  const EncoderSpec& spec() const noexcept { return spec_; }

  /// batch x feature_dim. Throws ShapeError when an image does not match the
  /// input spec.
  virtual nn::Matrix forward(std::span<const ImageTensor> images) = 0;
  virtual void backward(const nn::Matrix& grad_features) = 0;
  virtual nn::ParameterList parameters() = 0;

  virtual bool has_attention() const noexcept { return false; }
  /// maps[image][layer] recorded during the last forward.
  virtual std::vector<std::vector<AttentionMap>> last_attention() const;

 protected:
  void check_inputs(std::span<const ImageTensor> images) const;

 private:
  EncoderSpec spec_;
};

std::unique_ptr<Encoder> make_encoder(const EncoderSpec& spec, std::uint64_t seed);

/// Runs a forward pass and returns every layer's attention for every image.
/// Throws UnsupportedError for encoders without attention.
std::vector<std::vector<AttentionMap>> capture_attention(Encoder& encoder,
                                                         std::span<const ImageTensor> images);

/// Linear layers with GELU in between.
class Mlp {
 public:
  Mlp(const std::string& name, std::vector<std::size_t> dims, std::mt19937_64& gen);

  nn::Matrix forward(const nn::Matrix& x) { return net_.forward(x); }
  nn::Matrix backward(const nn::Matrix& grad) { return net_.backward(grad); }
  nn::ParameterList parameters();

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t in_dim() const noexcept { return dims_.front(); }
  std::size_t out_dim() const noexcept { return dims_.back(); }
  void zero_output_layer();

 private:
  std::vector<std::size_t> dims_;
  nn::Sequential net_;
  nn::Linear* last_ = nullptr;
};

struct HeadSpec {
  std::vector<std::size_t> hidden{64};
  std::size_t bins = 10;

  friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

void to_json(nlohmann::json& j, const HeadSpec& s);
void from_json(const nlohmann::json& j, HeadSpec& s);

/// Backbone + MLP head + softmax: predicts a score distribution per image.
class ScoreModel {
 public:
  ScoreModel(std::unique_ptr<Encoder> backbone, const HeadSpec& head, std::uint64_t seed);

  /// batch x bins, rows on the probability simplex.
  nn::Matrix forward(std::span<const ImageTensor> images);
  /// Backpropagates dL/dprobs of the last forward.
  void backward(const nn::Matrix& grad_probs);
  nn::ParameterList parameters();

  Encoder& backbone() noexcept { return *backbone_; }
  Mlp& head() noexcept { return head_; }
  const HeadSpec& head_spec() const noexcept { return head_spec_; }
  std::size_t bins() const noexcept { return head_spec_.bins; }

 private:
  std::unique_ptr<Encoder> backbone_;
  HeadSpec head_spec_;
  Mlp head_;
  nn::Matrix probs_;
};

/// Validated distributions for a batch.
std::vector<ScoreDistribution> predict_distribution(ScoreModel& model,
                                                    std::span<const ImageTensor> images,
                                                    const std::vector<double>& bin_values);

/// Backbone followed by the projector that maps into the teacher feature space.
class ProjectedEncoder {
 public:
  ProjectedEncoder(std::unique_ptr<Encoder> backbone, std::vector<std::size_t> projector_dims,
                   std::uint64_t seed);

  nn::Matrix forward(std::span<const ImageTensor> images);
  void backward(const nn::Matrix& grad_projected);
  nn::ParameterList parameters();

  Encoder& backbone() noexcept { return *backbone_; }
  Mlp& projector() noexcept { return projector_; }
  std::unique_ptr<Encoder> release_backbone() noexcept { return std::move(backbone_); }

 private:
  std::unique_ptr<Encoder> backbone_;
  Mlp projector_;
};

/// Default projector: student_dim -> teacher_dim -> teacher_dim.
std::vector<std::size_t> default_projector_dims(std::size_t student_dim, std::size_t teacher_dim);

/// Read-only wrapper around an encoder whose parameters must never change.
/// No backward path is exposed.
class FrozenEncoder {
 public:
  FrozenEncoder(std::unique_ptr<Encoder> encoder, std::string name);

  nn::Matrix encode(std::span<const ImageTensor> images);
  std::vector<std::vector<AttentionMap>> capture_attention(std::span<const ImageTensor> images);
  const EncoderSpec& spec() const noexcept { return encoder_->spec(); }
  std::uint64_t parameter_hash() const;
  /// name, architecture and weight digest.
  std::string teacher_id() const;

 private:
  std::unique_ptr<Encoder> encoder_;
  std::string name_;
};

/// Wraps a trained score model as a frozen pseudo-label source.
class FrozenScoreModel {
 public:
  explicit FrozenScoreModel(std::unique_ptr<ScoreModel> model) : model_(std::move(model)) {}

  nn::Matrix predict(std::span<const ImageTensor> images) { return model_->forward(images); }
  std::size_t bins() const noexcept { return model_->bins(); }
  std::uint64_t parameter_hash() const;

 private:
  std::unique_ptr<ScoreModel> model_;
};

}  // namespace aeskd
