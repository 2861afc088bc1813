// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/nn/optim.hpp"

#include <cmath>

#include <fmt/format.h>

#include "aeskd/errors.hpp"

namespace aeskd::nn {

Adam::Adam(ParameterList params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= cfg_.lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
  }
}

void Adam::export_state(const std::string& prefix, std::map<std::string, Matrix>& tensors,
                        std::uint64_t& step_count) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    tensors[prefix + "m/" + params_[i]->name] = m_[i];
    tensors[prefix + "v/" + params_[i]->name] = v_[i];
  }
  step_count = t_;
}

void Adam::import_state(const std::string& prefix, const std::map<std::string, Matrix>& tensors,
                        std::uint64_t step_count) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    for (auto* buf : {&m_[i], &v_[i]}) {
      const std::string key = prefix + (buf == &m_[i] ? "m/" : "v/") + params_[i]->name;
      const auto it = tensors.find(key);
      if (it == tensors.end()) throw IntegrityError(fmt::format("checkpoint lacks optimizer state '{}'", key));
      if (it->second.rows() != buf->rows() || it->second.cols() != buf->cols()) {
        throw IntegrityError(fmt::format("optimizer state '{}' has the wrong shape", key));
      }
      *buf = it->second;
    }
  }
  t_ = step_count;
}

double gradient_norm(const ParameterList& params) {
  double sq = 0.0;
  for (const auto* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

void clip_gradients(const ParameterList& params, double max_norm) {
  const double norm = gradient_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto* p : params) p->grad *= s;
  }
}

}  // namespace aeskd::nn
