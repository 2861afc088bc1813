// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include <gtest/gtest.h>

#include <functional>
#include <random>

#include "aeskd/errors.hpp"
#include "aeskd/model_zoo.hpp"
#include "aeskd/nn/layers.hpp"
#include "aeskd/nn/optim.hpp"
#include "oracles.hpp"

using namespace aeskd;
using nn::Matrix;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(gen);
  return m;
}

double weighted_sum(const Matrix& out, const Matrix& w) { return (out.array() * w.array()).sum(); }

/// Checks dL/dx and every parameter gradient of L = <w, f(x)> by central
/// differences, sampling at most `per_param` entries per tensor.
void check_layer(nn::Layer& layer, Matrix x, std::mt19937_64& gen, double tol = 1e-5, std::size_t per_param = 40) {
  const Matrix out = layer.forward(x);
  const Matrix w = random_matrix(out.rows(), out.cols(), gen);
  nn::ParameterList params;
  layer.collect_parameters(params);
  nn::zero_grad(params);
  const Matrix dx = layer.backward(w);

  const auto loss = [&] { return weighted_sum(layer.forward(x), w); };
  std::vector<double> analytic, numeric;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-5, saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = loss();
    x.data()[i] = saved - h;
    const double down = loss();
    x.data()[i] = saved;
    analytic.push_back(dx.data()[i]);
    numeric.push_back((up - down) / (2 * h));
  }
  EXPECT_LT(testutil::relative_error(analytic, numeric), tol) << "input gradient";

  for (auto* p : params) {
    analytic.clear();
    numeric.clear();
    const auto n = static_cast<std::size_t>(p->value.size());
    for (std::size_t k = 0; k < std::min(n, per_param); ++k) {
      const auto i = static_cast<Eigen::Index>(n <= per_param ? k : gen() % n);
      const double h = 1e-5, saved = p->value.data()[i];
      p->value.data()[i] = saved + h;
      const double up = loss();
      p->value.data()[i] = saved - h;
      const double down = loss();
      p->value.data()[i] = saved;
      analytic.push_back(p->grad.data()[i]);
      numeric.push_back((up - down) / (2 * h));
    }
    EXPECT_LT(testutil::relative_error(analytic, numeric), tol) << p->name;
  }
}

std::vector<ImageTensor> random_images(std::size_t n, int size, std::mt19937_64& gen) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<ImageTensor> out(n, ImageTensor{3, size, size, std::vector<double>(static_cast<std::size_t>(3 * size * size))});
  for (auto& img : out) {
    for (auto& v : img.data) v = d(gen);
  }
  return out;
}

/// Parameter gradients of L = <w, f(params)> for a whole model.
void check_model(const std::function<Matrix()>& forward, const std::function<void(const Matrix&)>& backward,
                 const nn::ParameterList& params, std::mt19937_64& gen, double tol = 1e-4) {
  const Matrix out = forward();
  const Matrix w = random_matrix(out.rows(), out.cols(), gen);
  nn::zero_grad(params);
  backward(w);
  for (auto* p : params) {
    std::vector<double> analytic, numeric;
    const auto n = static_cast<std::size_t>(p->value.size());
    for (std::size_t k = 0; k < std::min<std::size_t>(n, 12); ++k) {
      const auto i = static_cast<Eigen::Index>(n <= 12 ? k : gen() % n);
      const double h = 1e-5, saved = p->value.data()[i];
      p->value.data()[i] = saved + h;
      const double up = weighted_sum(forward(), w);
      p->value.data()[i] = saved - h;
      const double down = weighted_sum(forward(), w);
      p->value.data()[i] = saved;
      analytic.push_back(p->grad.data()[i]);
      numeric.push_back((up - down) / (2 * h));
    }
    EXPECT_LT(testutil::relative_error(analytic, numeric), tol) << p->name;
  }
}

}  // namespace

TEST(Layers, LinearGradients) {
  std::mt19937_64 gen(41);
  nn::Linear l("fc", 5, 4, gen);
  check_layer(l, random_matrix(3, 5, gen), gen);
}

TEST(Layers, LayerNormGradients) {
  std::mt19937_64 gen(42);
  nn::LayerNorm ln("ln", 6);
  nn::ParameterList ps;
  ln.collect_parameters(ps);
  for (auto* p : ps) p->value = random_matrix(p->value.rows(), p->value.cols(), gen);
  check_layer(ln, random_matrix(4, 6, gen), gen);
}

TEST(Layers, ActivationGradients) {
  std::mt19937_64 gen(43);
  nn::Gelu g;
  check_layer(g, random_matrix(4, 7, gen), gen);
  nn::Relu r;
  Matrix x = random_matrix(4, 7, gen);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (std::abs(x.data()[i]) < 1e-3) x.data()[i] = 0.5;
  }
  check_layer(r, x, gen);
}

TEST(Layers, SelfAttentionGradients) {
  std::mt19937_64 gen(44);
  nn::SelfAttention a("attn", 8, 2, 5, gen);
  check_layer(a, random_matrix(2 * 5, 8, gen), gen);
  for (const auto& p : a.last_attention()) {
    EXPECT_EQ(p.rows(), 5);
    for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
  }
  EXPECT_EQ(a.last_attention().size(), 4u);
}

TEST(Layers, TransformerBlockGradients) {
  std::mt19937_64 gen(45);
  nn::TransformerBlock b("blk", 8, 2, 12, 5, gen);
  check_layer(b, random_matrix(2 * 5, 8, gen), gen);
}

TEST(Layers, Conv2dGradients) {
  std::mt19937_64 gen(46);
  nn::Conv2d c("conv", 3, 4, 3, 2, 1, 6, 6, gen);
  EXPECT_EQ(c.out_h(), 3u);
  check_layer(c, random_matrix(2 * 36, 3, gen), gen);
}

TEST(Layers, SoftmaxBackward) {
  std::mt19937_64 gen(47);
  const Matrix logits = random_matrix(3, 5, gen);
  const Matrix w = random_matrix(3, 5, gen);
  const Matrix probs = nn::softmax_rows(logits);
  const Matrix analytic = nn::softmax_rows_backward(probs, w);
  std::vector<double> a(analytic.data(), analytic.data() + analytic.size());
  std::vector<double> x(logits.data(), logits.data() + logits.size());
  const auto num = testutil::numeric_gradient([&](const std::vector<double>& v) {
    Matrix m = Eigen::Map<const Matrix>(v.data(), 3, 5);
    return weighted_sum(nn::softmax_rows(m), w);
  }, x);
  EXPECT_LT(testutil::relative_error(a, num), 1e-6);
  // Overflow safety.
  Matrix big(1, 3);
  big << 1000.0, 1001.0, 999.0;
  EXPECT_TRUE(nn::softmax_rows(big).allFinite());
}

TEST(Models, TransformerEncoderGradients) {
  std::mt19937_64 gen(48);
  EncoderSpec spec;
  spec.image_size = 16;
  spec.patch = 8;
  spec.width = 8;
  spec.heads = 2;
  spec.mlp_hidden = 12;
  spec.feature_dim = 6;
  auto enc = make_encoder(spec, 3);
  const auto images = random_images(2, 16, gen);
  check_model([&] { return enc->forward(images); }, [&](const Matrix& g) { enc->backward(g); }, enc->parameters(), gen);
}

TEST(Models, ConvEncoderGradients) {
  std::mt19937_64 gen(49);
  EncoderSpec spec;
  spec.family = EncoderFamily::tiny_conv;
  spec.image_size = 8;
  spec.conv_channels = {4, 6};
  spec.feature_dim = 5;
  auto enc = make_encoder(spec, 4);
  const auto images = random_images(2, 8, gen);
  check_model([&] { return enc->forward(images); }, [&](const Matrix& g) { enc->backward(g); }, enc->parameters(), gen);
}

TEST(Models, ScoreModelGradientsAndSimplex) {
  std::mt19937_64 gen(50);
  EncoderSpec spec;
  spec.image_size = 16;
  spec.width = 8;
  spec.mlp_hidden = 8;
  spec.feature_dim = 8;
  ScoreModel model(make_encoder(spec, 5), HeadSpec{{6}, 10}, 6);
  const auto images = random_images(3, 16, gen);
  const Matrix probs = model.forward(images);
  for (Eigen::Index r = 0; r < probs.rows(); ++r) EXPECT_NEAR(probs.row(r).sum(), 1.0, 1e-12);
  check_model([&] { return model.forward(images); }, [&](const Matrix& g) { model.backward(g); }, model.parameters(), gen);
  const auto dists = predict_distribution(model, images, default_bin_values());
  EXPECT_EQ(dists.size(), 3u);
}

TEST(Models, ProjectedEncoderGradients) {
  std::mt19937_64 gen(51);
  EncoderSpec spec;
  spec.image_size = 16;
  spec.width = 8;
  spec.mlp_hidden = 8;
  spec.feature_dim = 8;
  ProjectedEncoder pe(make_encoder(spec, 7), default_projector_dims(8, 12), 8);
  EXPECT_EQ(pe.projector().out_dim(), 12u);
  const auto images = random_images(2, 16, gen);
  check_model([&] { return pe.forward(images); }, [&](const Matrix& g) { pe.backward(g); }, pe.parameters(), gen);
}

TEST(Models, AttentionCapture) {
  std::mt19937_64 gen(52);
  EncoderSpec spec;
  spec.image_size = 24;
  spec.patch = 8;
  spec.depth = 3;
  spec.heads = 2;
  auto enc = make_encoder(spec, 9);
  const auto maps = capture_attention(*enc, random_images(2, 24, gen));
  ASSERT_EQ(maps.size(), 2u);
  ASSERT_EQ(maps[0].size(), 3u);
  for (const auto& m : maps[0]) {
    EXPECT_EQ(m.grid_h, 3u);
    EXPECT_EQ(m.heads.size(), 2u);
    EXPECT_NO_THROW(m.validate());
  }
  spec.family = EncoderFamily::tiny_conv;
  auto conv = make_encoder(spec, 9);
  EXPECT_THROW(capture_attention(*conv, random_images(1, 24, gen)), UnsupportedError);
}

TEST(Models, DeterministicInitAndShapeChecks) {
  EncoderSpec spec;
  auto a = make_encoder(spec, 11);
  auto b = make_encoder(spec, 11);
  auto c = make_encoder(spec, 12);
  EXPECT_EQ(nn::parameter_hash(a->parameters()), nn::parameter_hash(b->parameters()));
  EXPECT_NE(nn::parameter_hash(a->parameters()), nn::parameter_hash(c->parameters()));
  std::mt19937_64 gen(1);
  EXPECT_THROW(a->forward(random_images(1, 16, gen)), ShapeError);
  spec.patch = 7;
  EXPECT_THROW(spec.validate(), ConfigError);
  EncoderSpec ext;
  ext.family = EncoderFamily::external;
  EXPECT_THROW(make_encoder(ext, 0), UnsupportedError);
}

TEST(Models, FrozenEncoderIsStable) {
  std::mt19937_64 gen(53);
  FrozenEncoder t(make_encoder(EncoderSpec{}, 13), "teacher");
  const auto h = t.parameter_hash();
  const auto images = random_images(2, 32, gen);
  const Matrix f1 = t.encode(images);
  const Matrix f2 = t.encode(images);
  EXPECT_EQ(f1, f2);
  EXPECT_EQ(t.parameter_hash(), h);
  EXPECT_NE(t.teacher_id().find("teacher|"), std::string::npos);
}

TEST(Optim, AdamFirstStepMovesByLr) {
  nn::Parameter p("w", Matrix::Constant(1, 3, 1.0));
  p.grad << 0.5, -2.0, 0.0;
  nn::Adam opt({&p}, {0.1, 0.9, 0.999, 1e-8});
  opt.step();
  EXPECT_NEAR(p.value(0, 0), 0.9, 1e-6);
  EXPECT_NEAR(p.value(0, 1), 1.1, 1e-6);
  EXPECT_DOUBLE_EQ(p.value(0, 2), 1.0);
}

TEST(Optim, AdamMinimizesQuadraticAndStateRoundTrips) {
  nn::Parameter p("w", Matrix::Constant(1, 2, 3.0));
  nn::Adam opt({&p}, {0.05, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 400; ++i) {
    p.grad = 2.0 * p.value;
    opt.step();
  }
  EXPECT_LT(p.value.norm(), 0.05);

  std::map<std::string, Matrix> tensors;
  std::uint64_t t = 0;
  opt.export_state("o/", tensors, t);
  EXPECT_EQ(t, 400u);
  nn::Parameter q("w", p.value);
  nn::Adam other({&q}, {0.05, 0.9, 0.999, 1e-8});
  other.import_state("o/", tensors, t);
  p.grad = 2.0 * p.value;
  q.grad = p.grad;
  opt.step();
  other.step();
  EXPECT_EQ(p.value, q.value);
}

TEST(Optim, GradientClipping) {
  nn::Parameter a("a", Matrix::Zero(1, 2)), b("b", Matrix::Zero(1, 1));
  a.grad << 3.0, 0.0;
  b.grad << 4.0;
  EXPECT_DOUBLE_EQ(nn::gradient_norm({&a, &b}), 5.0);
  nn::clip_gradients({&a, &b}, 1.0);
  EXPECT_NEAR(nn::gradient_norm({&a, &b}), 1.0, 1e-12);
  nn::clip_gradients({&a, &b}, 10.0);
  EXPECT_NEAR(nn::gradient_norm({&a, &b}), 1.0, 1e-12);
}
