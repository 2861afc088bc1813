// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/model_zoo.hpp"

#include <fmt/format.h>

#include "aeskd/errors.hpp"
#include "aeskd/rng.hpp"

namespace aeskd {

using nn::Matrix;

EncoderFamily parse_family(const std::string& name) {
  if (name == "tiny-transformer") return EncoderFamily::tiny_transformer;
  if (name == "tiny-conv") return EncoderFamily::tiny_conv;
  if (name == "external") return EncoderFamily::external;
  throw ConfigError(fmt::format("unknown encoder family '{}'", name));
}

std::string to_string(EncoderFamily family) {
  switch (family) {
    case EncoderFamily::tiny_transformer: return "tiny-transformer";
    case EncoderFamily::tiny_conv: return "tiny-conv";
    case EncoderFamily::external: return "external";
  }
  return "unknown";
}

void EncoderSpec::validate() const {
  if (feature_dim < 1) throw ConfigError("encoder feature_dim must be >= 1");
  if (image_size < 1 || channels != 3) throw ConfigError("encoders take RGB images of size >= 1");
  if (family == EncoderFamily::tiny_transformer) {
    if (patch < 1 || image_size % patch != 0) {
      throw ConfigError(fmt::format("image size {} is not a multiple of patch {}", image_size, patch));
    }
    if (depth < 1 || width < 1 || heads < 1 || width % heads != 0 || mlp_hidden < 1) {
      throw ConfigError("transformer needs depth, width, heads >= 1 with width divisible by heads");
    }
  } else if (family == EncoderFamily::tiny_conv) {
    if (conv_channels.empty()) throw ConfigError("conv encoder needs at least one stage");
  }
}

void to_json(nlohmann::json& j, const EncoderSpec& s) {
  j = {{"family", to_string(s.family)}, {"image_size", s.image_size}, {"channels", s.channels},
       {"patch", s.patch},              {"depth", s.depth},           {"width", s.width},
       {"heads", s.heads},              {"mlp_hidden", s.mlp_hidden}, {"conv_channels", s.conv_channels},
       {"feature_dim", s.feature_dim}};
}

void from_json(const nlohmann::json& j, EncoderSpec& s) {
  s.family = parse_family(j.at("family").get<std::string>());
  j.at("image_size").get_to(s.image_size);
  j.at("channels").get_to(s.channels);
  j.at("patch").get_to(s.patch);
  j.at("depth").get_to(s.depth);
  j.at("width").get_to(s.width);
  j.at("heads").get_to(s.heads);
  j.at("mlp_hidden").get_to(s.mlp_hidden);
  j.at("conv_channels").get_to(s.conv_channels);
  j.at("feature_dim").get_to(s.feature_dim);
}

std::string EncoderSpec::fingerprint() const { return nlohmann::json(*this).dump(); }

void to_json(nlohmann::json& j, const HeadSpec& s) { j = {{"hidden", s.hidden}, {"bins", s.bins}}; }

void from_json(const nlohmann::json& j, HeadSpec& s) {
  j.at("hidden").get_to(s.hidden);
  j.at("bins").get_to(s.bins);
}

std::vector<std::vector<AttentionMap>> Encoder::last_attention() const {
  throw UnsupportedError(fmt::format("{} encoders do not expose attention", to_string(spec_.family)));
}

void Encoder::check_inputs(std::span<const ImageTensor> images) const {
  if (images.empty()) throw ShapeError("empty image batch");
  const auto s = static_cast<int>(spec_.image_size);
  for (const auto& im : images) {
    if (im.channels != static_cast<int>(spec_.channels) || im.height != s || im.width != s) {
      throw ShapeError(fmt::format("encoder expects {}x{}x{} inputs, got {}x{}x{}", spec_.channels, s,
                                   s, im.channels, im.height, im.width));
    }
  }
}

namespace {

class TransformerEncoder final : public Encoder {
 public:
  TransformerEncoder(const EncoderSpec& spec, std::mt19937_64& gen)
      : Encoder(spec),
        grid_(spec.grid()),
        tokens_(spec.tokens()),
        patch_dim_(spec.channels * spec.patch * spec.patch),
        embed_("backbone.patch_embed", patch_dim_, spec.width, gen),
        cls_("backbone.cls", Matrix::Zero(1, static_cast<Eigen::Index>(spec.width))),
        pos_("backbone.pos", Matrix::Zero(static_cast<Eigen::Index>(tokens_),
                                         static_cast<Eigen::Index>(spec.width))),
        norm_("backbone.norm", spec.width) {
    std::normal_distribution<double> dist(0.0, 0.02);
    for (Eigen::Index i = 0; i < cls_.value.size(); ++i) cls_.value.data()[i] = dist(gen);
    for (Eigen::Index i = 0; i < pos_.value.size(); ++i) pos_.value.data()[i] = dist(gen);
    for (std::size_t l = 0; l < spec.depth; ++l) {
      blocks_.push_back(std::make_unique<nn::TransformerBlock>(fmt::format("backbone.blocks.{}", l),
                                                               spec.width, spec.heads,
                                                               spec.mlp_hidden, tokens_, gen));
    }
    if (spec.feature_dim != spec.width) {
      proj_ = std::make_unique<nn::Linear>("backbone.feature_proj", spec.width, spec.feature_dim, gen);
    }
  }

  Matrix forward(std::span<const ImageTensor> images) override {
    check_inputs(images);
    batch_ = images.size();
    const auto p = static_cast<int>(spec().patch);
    const auto n_patches = static_cast<Eigen::Index>(grid_ * grid_);
    const auto t = static_cast<Eigen::Index>(tokens_);

    Matrix patches(static_cast<Eigen::Index>(batch_) * n_patches, static_cast<Eigen::Index>(patch_dim_));
    for (std::size_t b = 0; b < batch_; ++b) {
      const auto& im = images[b];
      for (std::size_t gy = 0; gy < grid_; ++gy) {
        for (std::size_t gx = 0; gx < grid_; ++gx) {
          const auto row = static_cast<Eigen::Index>(b) * n_patches + static_cast<Eigen::Index>(gy * grid_ + gx);
          Eigen::Index col = 0;
          for (int c = 0; c < im.channels; ++c) {
            for (int py = 0; py < p; ++py) {
              for (int px = 0; px < p; ++px) {
                patches(row, col++) = im.at(c, static_cast<int>(gy) * p + py, static_cast<int>(gx) * p + px);
              }
            }
          }
        }
      }
    }
    const Matrix embedded = embed_.forward(patches);
    Matrix x(static_cast<Eigen::Index>(batch_) * t, static_cast<Eigen::Index>(spec().width));
    for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(batch_); ++b) {
      x.row(b * t) = cls_.value.row(0) + pos_.value.row(0);
      x.block(b * t + 1, 0, n_patches, x.cols()) =
          embedded.block(b * n_patches, 0, n_patches, x.cols()) + pos_.value.bottomRows(n_patches);
    }
    for (auto& block : blocks_) x = block->forward(x);

    Matrix cls(static_cast<Eigen::Index>(batch_), x.cols());
    for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(batch_); ++b) cls.row(b) = x.row(b * t);
    Matrix feat = norm_.forward(cls);
    if (proj_) feat = proj_->forward(feat);
    return feat;
  }

  void backward(const Matrix& grad_features) override {
    const auto n_patches = static_cast<Eigen::Index>(grid_ * grid_);
    const auto t = static_cast<Eigen::Index>(tokens_);
    Matrix g = grad_features;
    if (proj_) g = proj_->backward(g);
    const Matrix d_cls = norm_.backward(g);
    Matrix dx = Matrix::Zero(static_cast<Eigen::Index>(batch_) * t, static_cast<Eigen::Index>(spec().width));
    for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(batch_); ++b) dx.row(b * t) = d_cls.row(b);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) dx = (*it)->backward(dx);

    Matrix d_embedded(static_cast<Eigen::Index>(batch_) * n_patches, dx.cols());
    for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(batch_); ++b) {
      cls_.grad.row(0) += dx.row(b * t);
      pos_.grad += dx.block(b * t, 0, t, dx.cols());
      d_embedded.block(b * n_patches, 0, n_patches, dx.cols()) = dx.block(b * t + 1, 0, n_patches, dx.cols());
    }
    embed_.backward(d_embedded);
  }

  nn::ParameterList parameters() override {
    nn::ParameterList out;
    embed_.collect_parameters(out);
    out.push_back(&cls_);
    out.push_back(&pos_);
    for (auto& block : blocks_) block->collect_parameters(out);
    norm_.collect_parameters(out);
    if (proj_) proj_->collect_parameters(out);
    return out;
  }

  bool has_attention() const noexcept override { return true; }

  std::vector<std::vector<AttentionMap>> last_attention() const override {
    std::vector<std::vector<AttentionMap>> maps(batch_);
    for (std::size_t b = 0; b < batch_; ++b) {
      for (const auto& block : blocks_) {
        const auto& attn = block->attention();
        AttentionMap m;
        m.grid_h = grid_;
        m.grid_w = grid_;
        m.cls_present = true;
        for (std::size_t h = 0; h < attn.heads(); ++h) m.heads.emplace_back(attn.last_attention()[b * attn.heads() + h]);
        maps[b].push_back(std::move(m));
      }
    }
    return maps;
  }

 private:
  std::size_t grid_;
  std::size_t tokens_;
  std::size_t patch_dim_;
  nn::Linear embed_;
  nn::Parameter cls_;
  nn::Parameter pos_;
  std::vector<std::unique_ptr<nn::TransformerBlock>> blocks_;
  nn::LayerNorm norm_;
  std::unique_ptr<nn::Linear> proj_;
  std::size_t batch_ = 0;
};

class ConvEncoder final : public Encoder {
 public:
  ConvEncoder(const EncoderSpec& spec, std::mt19937_64& gen) : Encoder(spec) {
    std::size_t h = spec.image_size;
    std::size_t c = spec.channels;
    for (std::size_t i = 0; i < spec.conv_channels.size(); ++i) {
      auto conv = std::make_unique<nn::Conv2d>(fmt::format("backbone.conv{}", i), c, spec.conv_channels[i],
                                               3, 2, 1, h, h, gen);
      h = conv->out_h();
      c = spec.conv_channels[i];
      stages_.add(std::move(conv));
      stages_.add(std::make_unique<nn::Relu>());
    }
    pooled_pixels_ = h * h;
    pooled_channels_ = c;
    fc_ = std::make_unique<nn::Linear>("backbone.fc", c, spec.feature_dim, gen);
  }

  Matrix forward(std::span<const ImageTensor> images) override {
    check_inputs(images);
    batch_ = images.size();
    const auto s = static_cast<int>(spec().image_size);
    Matrix x(static_cast<Eigen::Index>(batch_) * s * s, 3);
    for (std::size_t b = 0; b < batch_; ++b) {
      for (int y = 0; y < s; ++y) {
        for (int xx = 0; xx < s; ++xx) {
          for (int c = 0; c < 3; ++c) {
            x(static_cast<Eigen::Index>(b) * s * s + y * s + xx, c) = images[b].at(c, y, xx);
          }
        }
      }
    }
    const Matrix maps = stages_.forward(x);
    const auto px = static_cast<Eigen::Index>(pooled_pixels_);
    Matrix pooled(static_cast<Eigen::Index>(batch_), static_cast<Eigen::Index>(pooled_channels_));
    for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(batch_); ++b) {
      pooled.row(b) = maps.block(b * px, 0, px, maps.cols()).colwise().mean();
    }
    return fc_->forward(pooled);
  }

  void backward(const Matrix& grad_features) override {
    const Matrix d_pooled = fc_->backward(grad_features);
    const auto px = static_cast<Eigen::Index>(pooled_pixels_);
    Matrix d_maps(static_cast<Eigen::Index>(batch_) * px, d_pooled.cols());
    for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(batch_); ++b) {
      d_maps.block(b * px, 0, px, d_pooled.cols()).rowwise() = d_pooled.row(b) / static_cast<double>(px);
    }
    stages_.backward(d_maps);
  }

  nn::ParameterList parameters() override {
    nn::ParameterList out;
    stages_.collect_parameters(out);
    fc_->collect_parameters(out);
    return out;
  }

 private:
  nn::Sequential stages_;
  std::unique_ptr<nn::Linear> fc_;
  std::size_t pooled_pixels_ = 0;
  std::size_t pooled_channels_ = 0;
  std::size_t batch_ = 0;
};

}  // namespace

std::unique_ptr<Encoder> make_encoder(const EncoderSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 gen(mix_seed({seed, fnv1a("encoder")}));
  switch (spec.family) {
    case EncoderFamily::tiny_transformer: return std::make_unique<TransformerEncoder>(spec, gen);
    case EncoderFamily::tiny_conv: return std::make_unique<ConvEncoder>(spec, gen);
    case EncoderFamily::external: break;
  }
  throw UnsupportedError("external encoders are feature caches and cannot be instantiated");
}

std::vector<std::vector<AttentionMap>> capture_attention(Encoder& encoder,
                                                         std::span<const ImageTensor> images) {
  if (!encoder.has_attention()) {
    throw UnsupportedError(fmt::format("{} encoders have no attention to capture",
                                       to_string(encoder.spec().family)));
  }
  encoder.forward(images);
  return encoder.last_attention();
}

// --- Mlp ------------------------------------------------------------------

Mlp::Mlp(const std::string& name, std::vector<std::size_t> dims, std::mt19937_64& gen)
    : dims_(std::move(dims)) {
  if (dims_.size() < 2) throw ConfigError(fmt::format("{} needs at least input and output sizes", name));
  for (std::size_t i = 0; i + 1 < dims_.size(); ++i) {
    if (dims_[i] < 1 || dims_[i + 1] < 1) throw ConfigError(fmt::format("{} has a zero-width layer", name));
    auto lin = std::make_unique<nn::Linear>(fmt::format("{}.fc{}", name, i), dims_[i], dims_[i + 1], gen);
    last_ = lin.get();
    net_.add(std::move(lin));
    if (i + 2 < dims_.size()) net_.add(std::make_unique<nn::Gelu>());
  }
}

nn::ParameterList Mlp::parameters() {
  nn::ParameterList out;
  net_.collect_parameters(out);
  return out;
}

void Mlp::zero_output_layer() {
  last_->weight().value.setZero();
  last_->bias().value.setZero();
}

// --- ScoreModel -----------------------------------------------------------

namespace {

std::vector<std::size_t> head_dims(std::size_t in, const HeadSpec& head) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), head.hidden.begin(), head.hidden.end());
  dims.push_back(head.bins);
  return dims;
}

}  // namespace

ScoreModel::ScoreModel(std::unique_ptr<Encoder> backbone, const HeadSpec& head, std::uint64_t seed)
    : backbone_(std::move(backbone)),
      head_spec_(head),
      head_([&] {
        if (head.bins < 2) throw ConfigError("prediction head needs at least 2 bins");
        std::mt19937_64 gen(mix_seed({seed, fnv1a("head")}));
        return Mlp("head", head_dims(backbone_->spec().feature_dim, head), gen);
      }()) {}

Matrix ScoreModel::forward(std::span<const ImageTensor> images) {
  probs_ = nn::softmax_rows(head_.forward(backbone_->forward(images)));
  return probs_;
}

void ScoreModel::backward(const Matrix& grad_probs) {
  backbone_->backward(head_.backward(nn::softmax_rows_backward(probs_, grad_probs)));
}

nn::ParameterList ScoreModel::parameters() {
  auto out = backbone_->parameters();
  const auto h = head_.parameters();
  out.insert(out.end(), h.begin(), h.end());
  return out;
}

std::vector<ScoreDistribution> predict_distribution(ScoreModel& model,
                                                    std::span<const ImageTensor> images,
                                                    const std::vector<double>& bin_values) {
  if (bin_values.size() != model.bins()) {
    throw ShapeError(fmt::format("head predicts {} bins, task has {}", model.bins(), bin_values.size()));
  }
  const Matrix probs = model.forward(images);
  std::vector<ScoreDistribution> out;
  out.reserve(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    out.emplace_back(std::vector<double>(probs.row(r).begin(), probs.row(r).end()), bin_values);
  }
  return out;
}

// --- ProjectedEncoder -----------------------------------------------------

std::vector<std::size_t> default_projector_dims(std::size_t student_dim, std::size_t teacher_dim) {
  return {student_dim, teacher_dim, teacher_dim};
}

ProjectedEncoder::ProjectedEncoder(std::unique_ptr<Encoder> backbone,
                                   std::vector<std::size_t> projector_dims, std::uint64_t seed)
    : backbone_(std::move(backbone)),
      projector_([&] {
        if (projector_dims.empty() || projector_dims.front() != backbone_->spec().feature_dim) {
          throw ConfigError("projector input must equal the backbone feature_dim");
        }
        std::mt19937_64 gen(mix_seed({seed, fnv1a("projector")}));
        return Mlp("projector", projector_dims, gen);
      }()) {}

Matrix ProjectedEncoder::forward(std::span<const ImageTensor> images) {
  return projector_.forward(backbone_->forward(images));
}

void ProjectedEncoder::backward(const Matrix& grad_projected) {
  backbone_->backward(projector_.backward(grad_projected));
}

nn::ParameterList ProjectedEncoder::parameters() {
  auto out = backbone_->parameters();
  const auto p = projector_.parameters();
  out.insert(out.end(), p.begin(), p.end());
  return out;
}

// --- frozen wrappers ------------------------------------------------------

FrozenEncoder::FrozenEncoder(std::unique_ptr<Encoder> encoder, std::string name)
    : encoder_(std::move(encoder)), name_(std::move(name)) {
  if (!encoder_) throw ArgumentError("frozen encoder needs a model");
}

Matrix FrozenEncoder::encode(std::span<const ImageTensor> images) { return encoder_->forward(images); }

std::vector<std::vector<AttentionMap>> FrozenEncoder::capture_attention(
    std::span<const ImageTensor> images) {
  return aeskd::capture_attention(*encoder_, images);
}

std::uint64_t FrozenEncoder::parameter_hash() const { return nn::parameter_hash(encoder_->parameters()); }

std::string FrozenEncoder::teacher_id() const {
  return fmt::format("{}|{}|{:016x}", name_, encoder_->spec().fingerprint(), parameter_hash());
}

std::uint64_t FrozenScoreModel::parameter_hash() const { return nn::parameter_hash(model_->parameters()); }

}  // namespace aeskd
