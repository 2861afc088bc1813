// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

// Minimal layer library with hand-written backward passes. Activations are
// row-major matrices whose rows are samples (or tokens of samples stacked
// sample-major). Each layer caches what its backward pass needs from the most
// recent forward call, so forward/backward must alternate per layer.

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace aeskd::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  std::string name;
  Matrix value;
  Matrix grad;
};

using ParameterList = std::vector<Parameter*>;

void zero_grad(const ParameterList& params);
/// FNV-1a over every parameter name and value; used to prove a model was
/// left untouched.
std::uint64_t parameter_hash(const ParameterList& params);
/// Copies values by position; throws ShapeError when the lists disagree.
void copy_parameters(const ParameterList& from, const ParameterList& to);

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Matrix forward(const Matrix& x) = 0;
  /// Returns dL/dx and accumulates parameter gradients.
  virtual Matrix backward(const Matrix& grad_out) = 0;
  virtual void collect_parameters(ParameterList& out) { (void)out; }
};

class Linear final : public Layer {
 public:
  Linear(std::string name, std::size_t in, std::size_t out, std::mt19937_64& gen);

  Matrix forward(const Matrix& x) override;
  Matrix backward(const Matrix& grad_out) override;
  void collect_parameters(ParameterList& out) override;

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  Parameter weight_;  // in x out
  Parameter bias_;    // 1 x out
  Matrix input_;
};

class LayerNorm final : public Layer {
 public:
  LayerNorm(std::string name, std::size_t dim, double eps = 1e-6);

  Matrix forward(const Matrix& x) override;
  Matrix backward(const Matrix& grad_out) override;
  void collect_parameters(ParameterList& out) override;

 private:
  Parameter gamma_;
  Parameter beta_;
  double eps_;
  Matrix normalized_;
  Eigen::VectorXd inv_std_;
};

/// tanh approximation of GELU.
class Gelu final : public Layer {
 public:
  Matrix forward(const Matrix& x) override;
  Matrix backward(const Matrix& grad_out) override;

 private:
  Matrix input_;
};

class Relu final : public Layer {
 public:
  Matrix forward(const Matrix& x) override;
  Matrix backward(const Matrix& grad_out) override;

 private:
  Matrix input_;
};

class Sequential final : public Layer {
 public:
  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  std::size_t size() const noexcept { return layers_.size(); }
  Layer& at(std::size_t i) { return *layers_.at(i); }

  Matrix forward(const Matrix& x) override;
  Matrix backward(const Matrix& grad_out) override;
  void collect_parameters(ParameterList& out) override;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/// Multi-head self-attention over sequences of `seq_len` tokens; the input
/// holds batch * seq_len rows. The attention probabilities of the last
/// forward call stay available for inspection.
class SelfAttention final : public Layer {
 public:
  SelfAttention(std::string name, std::size_t dim, std::size_t heads, std::size_t seq_len,
                std::mt19937_64& gen);

  Matrix forward(const Matrix& x) override;
  Matrix backward(const Matrix& grad_out) override;
  void collect_parameters(ParameterList& out) override;

  std::size_t heads() const noexcept { return heads_; }
  /// probs[b * heads + h] is the (seq_len x seq_len) attention of sample b,
  /// head h from the last forward.
  const std::vector<Matrix>& last_attention() const noexcept { return probs_; }

 private:
  std::size_t dim_;
  std::size_t heads_;
  std::size_t seq_len_;
  Linear qkv_;
  Linear out_;
  Matrix qkv_act_;
  std::vector<Matrix> probs_;
};

/// Pre-norm transformer block: x + attn(ln(x)), then x + mlp(ln(x)).
class TransformerBlock final : public Layer {
 public:
  TransformerBlock(const std::string& name, std::size_t dim, std::size_t heads,
                   std::size_t mlp_hidden, std::size_t seq_len, std::mt19937_64& gen);

  Matrix forward(const Matrix& x) override;
  Matrix backward(const Matrix& grad_out) override;
  void collect_parameters(ParameterList& out) override;

  const SelfAttention& attention() const noexcept { return attn_; }

 private:
  LayerNorm ln1_;
  SelfAttention attn_;
  LayerNorm ln2_;
  Sequential mlp_;
};

/// 2-D convolution on channel-last samples: each sample is (h * w) rows of
/// `in_channels` columns, stacked sample-major.
class Conv2d final : public Layer {
 public:
  Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t stride, std::size_t pad, std::size_t in_h, std::size_t in_w,
         std::mt19937_64& gen);

  std::size_t out_h() const noexcept { return out_h_; }
  std::size_t out_w() const noexcept { return out_w_; }

  Matrix forward(const Matrix& x) override;
  Matrix backward(const Matrix& grad_out) override;
  void collect_parameters(ParameterList& out) override;

 private:
  std::size_t in_c_, out_c_, k_, stride_, pad_, in_h_, in_w_, out_h_, out_w_;
  Parameter weight_;  // (k*k*in_c) x out_c
  Parameter bias_;
  Matrix cols_;       // im2col of the last input, all samples stacked
  std::size_t batch_ = 0;
};

/// Row-wise softmax and its vector-Jacobian product.
Matrix softmax_rows(const Matrix& logits);
Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad_probs);

}  // namespace aeskd::nn
