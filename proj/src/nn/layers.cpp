// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/nn/layers.hpp"

#include <cmath>

#include <fmt/format.h>

#include "aeskd/errors.hpp"
#include "aeskd/rng.hpp"

namespace aeskd::nn {

void zero_grad(const ParameterList& params) {
  for (auto* p : params) p->grad.setZero();
}

std::uint64_t parameter_hash(const ParameterList& params) {
  std::uint64_t h = fnv1a("params");
  for (const auto* p : params) {
    h = fnv1a(p->name, h);
    const std::int64_t shape[2] = {p->value.rows(), p->value.cols()};
    h = fnv1a(shape, sizeof(shape), h);
    h = fnv1a(p->value.data(), static_cast<std::size_t>(p->value.size()) * sizeof(double), h);
  }
  return h;
}

void copy_parameters(const ParameterList& from, const ParameterList& to) {
  if (from.size() != to.size()) {
    throw ShapeError(fmt::format("parameter count mismatch: {} vs {}", from.size(), to.size()));
  }
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i]->value.rows() != to[i]->value.rows() || from[i]->value.cols() != to[i]->value.cols()) {
      throw ShapeError(fmt::format("parameter '{}' shape mismatch", to[i]->name));
    }
    to[i]->value = from[i]->value;
  }
}

namespace {

Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& gen) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(gen);
  return m;
}

}  // namespace

// --- Linear ---------------------------------------------------------------

Linear::Linear(std::string name, std::size_t in, std::size_t out, std::mt19937_64& gen)
    : weight_(name + ".weight",
              random_normal(in, out, std::sqrt(2.0 / static_cast<double>(in + out)), gen)),
      bias_(name + ".bias", Matrix::Zero(1, static_cast<Eigen::Index>(out))) {}

Matrix Linear::forward(const Matrix& x) {
  if (x.cols() != weight_.value.rows()) {
    throw ShapeError(fmt::format("{}: input has {} columns, expected {}", weight_.name, x.cols(),
                                 weight_.value.rows()));
  }
  input_ = x;
  Matrix y = x * weight_.value;
  y.rowwise() += bias_.value.row(0);
  return y;
}

Matrix Linear::backward(const Matrix& grad_out) {
  weight_.grad.noalias() += input_.transpose() * grad_out;
  bias_.grad.row(0) += grad_out.colwise().sum();
  return grad_out * weight_.value.transpose();
}

void Linear::collect_parameters(ParameterList& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// --- LayerNorm ------------------------------------------------------------

LayerNorm::LayerNorm(std::string name, std::size_t dim, double eps)
    : gamma_(name + ".gamma", Matrix::Ones(1, static_cast<Eigen::Index>(dim))),
      beta_(name + ".beta", Matrix::Zero(1, static_cast<Eigen::Index>(dim))),
      eps_(eps) {}

Matrix LayerNorm::forward(const Matrix& x) {
  const auto n = static_cast<double>(x.cols());
  normalized_.resize(x.rows(), x.cols());
  inv_std_.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / n;
    const auto centered = x.row(r).array() - mean;
    const double var = centered.square().sum() / n;
    inv_std_[r] = 1.0 / std::sqrt(var + eps_);
    normalized_.row(r) = centered * inv_std_[r];
  }
  Matrix y = normalized_.array().rowwise() * gamma_.value.row(0).array();
  y.rowwise() += beta_.value.row(0);
  return y;
}

Matrix LayerNorm::backward(const Matrix& grad_out) {
  gamma_.grad.row(0) += (grad_out.array() * normalized_.array()).colwise().sum().matrix();
  beta_.grad.row(0) += grad_out.colwise().sum();
  const auto n = static_cast<double>(grad_out.cols());
  Matrix dx(grad_out.rows(), grad_out.cols());
  for (Eigen::Index r = 0; r < grad_out.rows(); ++r) {
    const Eigen::RowVectorXd dxhat = grad_out.row(r).array() * gamma_.value.row(0).array();
    const double mean_d = dxhat.sum() / n;
    const double mean_dx = dxhat.dot(normalized_.row(r)) / n;
    dx.row(r) = inv_std_[r] * (dxhat.array() - mean_d - normalized_.row(r).array() * mean_dx);
  }
  return dx;
}

void LayerNorm::collect_parameters(ParameterList& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

// --- activations ----------------------------------------------------------

namespace {

constexpr double kGeluK = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluC = 0.044715;

}  // namespace

Matrix Gelu::forward(const Matrix& x) {
  input_ = x;
  return x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluK * (v + kGeluC * v * v * v)));
  });
}

Matrix Gelu::backward(const Matrix& grad_out) {
  const Matrix slope = input_.unaryExpr([](double v) {
    const double t = std::tanh(kGeluK * (v + kGeluC * v * v * v));
    return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * kGeluK * (1.0 + 3.0 * kGeluC * v * v);
  });
  return grad_out.cwiseProduct(slope);
}

Matrix Relu::forward(const Matrix& x) {
  input_ = x;
  return x.cwiseMax(0.0);
}

Matrix Relu::backward(const Matrix& grad_out) {
  return (input_.array() > 0.0).select(grad_out, 0.0);
}

// --- Sequential -----------------------------------------------------------

Matrix Sequential::forward(const Matrix& x) {
  Matrix h = x;
  for (auto& l : layers_) h = l->forward(h);
  return h;
}

Matrix Sequential::backward(const Matrix& grad_out) {
  Matrix g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

void Sequential::collect_parameters(ParameterList& out) {
  for (auto& l : layers_) l->collect_parameters(out);
}

// --- softmax --------------------------------------------------------------

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Matrix softmax_rows_backward(const Matrix& probs, const Matrix& grad_probs) {
  Matrix out(probs.rows(), probs.cols());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const double inner = probs.row(r).dot(grad_probs.row(r));
    out.row(r) = probs.row(r).array() * (grad_probs.row(r).array() - inner);
  }
  return out;
}

// --- SelfAttention --------------------------------------------------------

SelfAttention::SelfAttention(std::string name, std::size_t dim, std::size_t heads,
                             std::size_t seq_len, std::mt19937_64& gen)
    : dim_(dim),
      heads_(heads),
      seq_len_(seq_len),
      qkv_(name + ".qkv", dim, 3 * dim, gen),
      out_(name + ".out", dim, dim, gen) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError(fmt::format("{}: width {} is not divisible by {} heads", name, dim, heads));
  }
}

Matrix SelfAttention::forward(const Matrix& x) {
  const auto t = static_cast<Eigen::Index>(seq_len_);
  if (x.rows() % t != 0) throw ShapeError("attention input rows are not a multiple of seq_len");
  const Eigen::Index batch = x.rows() / t;
  const auto dh = static_cast<Eigen::Index>(dim_ / heads_);
  const auto d = static_cast<Eigen::Index>(dim_);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  qkv_act_ = qkv_.forward(x);
  probs_.assign(static_cast<std::size_t>(batch) * heads_, Matrix());
  Matrix context(x.rows(), d);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(heads_); ++h) {
      const auto q = qkv_act_.block(b * t, h * dh, t, dh);
      const auto k = qkv_act_.block(b * t, d + h * dh, t, dh);
      const auto v = qkv_act_.block(b * t, 2 * d + h * dh, t, dh);
      Matrix& a = probs_[static_cast<std::size_t>(b) * heads_ + static_cast<std::size_t>(h)];
      a = softmax_rows((q * k.transpose()) * scale);
      context.block(b * t, h * dh, t, dh).noalias() = a * v;
    }
  }
  return out_.forward(context);
}

Matrix SelfAttention::backward(const Matrix& grad_out) {
  const auto t = static_cast<Eigen::Index>(seq_len_);
  const Eigen::Index batch = grad_out.rows() / t;
  const auto dh = static_cast<Eigen::Index>(dim_ / heads_);
  const auto d = static_cast<Eigen::Index>(dim_);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Matrix d_context = out_.backward(grad_out);
  Matrix d_qkv = Matrix::Zero(qkv_act_.rows(), qkv_act_.cols());
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(heads_); ++h) {
      const auto q = qkv_act_.block(b * t, h * dh, t, dh);
      const auto k = qkv_act_.block(b * t, d + h * dh, t, dh);
      const auto v = qkv_act_.block(b * t, 2 * d + h * dh, t, dh);
      const Matrix& a = probs_[static_cast<std::size_t>(b) * heads_ + static_cast<std::size_t>(h)];
      const auto dc = d_context.block(b * t, h * dh, t, dh);
      const Matrix da = dc * v.transpose();
      d_qkv.block(b * t, 2 * d + h * dh, t, dh).noalias() = a.transpose() * dc;
      const Matrix ds = softmax_rows_backward(a, da) * scale;
      d_qkv.block(b * t, h * dh, t, dh).noalias() = ds * k;
      d_qkv.block(b * t, d + h * dh, t, dh).noalias() = ds.transpose() * q;
    }
  }
  return qkv_.backward(d_qkv);
}

void SelfAttention::collect_parameters(ParameterList& out) {
  qkv_.collect_parameters(out);
  out_.collect_parameters(out);
}

// --- TransformerBlock -----------------------------------------------------

TransformerBlock::TransformerBlock(const std::string& name, std::size_t dim, std::size_t heads,
                                   std::size_t mlp_hidden, std::size_t seq_len,
                                   std::mt19937_64& gen)
    : ln1_(name + ".ln1", dim), attn_(name + ".attn", dim, heads, seq_len, gen), ln2_(name + ".ln2", dim) {
  mlp_.add(std::make_unique<Linear>(name + ".mlp.fc1", dim, mlp_hidden, gen));
  mlp_.add(std::make_unique<Gelu>());
  mlp_.add(std::make_unique<Linear>(name + ".mlp.fc2", mlp_hidden, dim, gen));
}

Matrix TransformerBlock::forward(const Matrix& x) {
  Matrix h = x + attn_.forward(ln1_.forward(x));
  return h + mlp_.forward(ln2_.forward(h));
}

Matrix TransformerBlock::backward(const Matrix& grad_out) {
  Matrix dh = grad_out + ln2_.backward(mlp_.backward(grad_out));
  return dh + ln1_.backward(attn_.backward(dh));
}

void TransformerBlock::collect_parameters(ParameterList& out) {
  ln1_.collect_parameters(out);
  attn_.collect_parameters(out);
  ln2_.collect_parameters(out);
  mlp_.collect_parameters(out);
}

// --- Conv2d ---------------------------------------------------------------

Conv2d::Conv2d(std::string name, std::size_t in_channels, std::size_t out_channels,
               std::size_t kernel, std::size_t stride, std::size_t pad, std::size_t in_h,
               std::size_t in_w, std::mt19937_64& gen)
    : in_c_(in_channels),
      out_c_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(pad),
      in_h_(in_h),
      in_w_(in_w),
      out_h_((in_h + 2 * pad - kernel) / stride + 1),
      out_w_((in_w + 2 * pad - kernel) / stride + 1),
      weight_(name + ".weight",
              random_normal(kernel * kernel * in_channels, out_channels,
                            std::sqrt(2.0 / static_cast<double>(kernel * kernel * in_channels)), gen)),
      bias_(name + ".bias", Matrix::Zero(1, static_cast<Eigen::Index>(out_channels))) {
  if (in_h + 2 * pad < kernel || in_w + 2 * pad < kernel) {
    throw ConfigError(fmt::format("{}: kernel larger than padded input", name));
  }
}

Matrix Conv2d::forward(const Matrix& x) {
  const auto pixels = static_cast<Eigen::Index>(in_h_ * in_w_);
  if (x.cols() != static_cast<Eigen::Index>(in_c_) || x.rows() % pixels != 0) {
    throw ShapeError(fmt::format("{}: bad input shape {}x{}", weight_.name, x.rows(), x.cols()));
  }
  batch_ = static_cast<std::size_t>(x.rows() / pixels);
  const auto out_pixels = static_cast<Eigen::Index>(out_h_ * out_w_);
  const auto patch = static_cast<Eigen::Index>(k_ * k_ * in_c_);
  cols_ = Matrix::Zero(static_cast<Eigen::Index>(batch_) * out_pixels, patch);
  for (std::size_t b = 0; b < batch_; ++b) {
    for (std::size_t oy = 0; oy < out_h_; ++oy) {
      for (std::size_t ox = 0; ox < out_w_; ++ox) {
        const auto row = static_cast<Eigen::Index>(b * out_h_ * out_w_ + oy * out_w_ + ox);
        for (std::size_t ky = 0; ky < k_; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) - static_cast<std::ptrdiff_t>(pad_);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h_)) continue;
          for (std::size_t kx = 0; kx < k_; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride_ + kx) - static_cast<std::ptrdiff_t>(pad_);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in_w_)) continue;
            const auto src = static_cast<Eigen::Index>(b * in_h_ * in_w_) +
                             static_cast<Eigen::Index>(iy) * static_cast<Eigen::Index>(in_w_) + ix;
            cols_.block(row, static_cast<Eigen::Index>((ky * k_ + kx) * in_c_), 1,
                        static_cast<Eigen::Index>(in_c_)) = x.row(src);
          }
        }
      }
    }
  }
  Matrix y = cols_ * weight_.value;
  y.rowwise() += bias_.value.row(0);
  return y;
}

Matrix Conv2d::backward(const Matrix& grad_out) {
  weight_.grad.noalias() += cols_.transpose() * grad_out;
  bias_.grad.row(0) += grad_out.colwise().sum();
  const Matrix d_cols = grad_out * weight_.value.transpose();
  Matrix dx = Matrix::Zero(static_cast<Eigen::Index>(batch_ * in_h_ * in_w_), static_cast<Eigen::Index>(in_c_));
  for (std::size_t b = 0; b < batch_; ++b) {
    for (std::size_t oy = 0; oy < out_h_; ++oy) {
      for (std::size_t ox = 0; ox < out_w_; ++ox) {
        const auto row = static_cast<Eigen::Index>(b * out_h_ * out_w_ + oy * out_w_ + ox);
        for (std::size_t ky = 0; ky < k_; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) - static_cast<std::ptrdiff_t>(pad_);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h_)) continue;
          for (std::size_t kx = 0; kx < k_; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride_ + kx) - static_cast<std::ptrdiff_t>(pad_);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in_w_)) continue;
            const auto dst = static_cast<Eigen::Index>(b * in_h_ * in_w_) +
                             static_cast<Eigen::Index>(iy) * static_cast<Eigen::Index>(in_w_) + ix;
            dx.row(dst) += d_cols.block(row, static_cast<Eigen::Index>((ky * k_ + kx) * in_c_), 1,
                                        static_cast<Eigen::Index>(in_c_));
          }
        }
      }
    }
  }
  return dx;
}

void Conv2d::collect_parameters(ParameterList& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

}  // namespace aeskd::nn
