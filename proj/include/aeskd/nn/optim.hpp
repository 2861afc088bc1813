// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "aeskd/nn/layers.hpp"

namespace aeskd::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction over one parameter group.
class Adam {
 public:
  Adam(ParameterList params, AdamConfig cfg);

  void set_lr(double lr) noexcept { cfg_.lr = lr; }
  double lr() const noexcept { return cfg_.lr; }
  std::uint64_t steps() const noexcept { return t_; }

  void zero_grad() { nn::zero_grad(params_); }
  void step();

  /// Moment buffers keyed "<prefix>m/<param>" and "<prefix>v/<param>", plus the
  /// step count.
  void export_state(const std::string& prefix, std::map<std::string, Matrix>& tensors,
                    std::uint64_t& step_count) const;
  void import_state(const std::string& prefix, const std::map<std::string, Matrix>& tensors,
                    std::uint64_t step_count);

 private:
  ParameterList params_;
  AdamConfig cfg_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::uint64_t t_ = 0;
};

/// Global L2 norm of every gradient in the list.
double gradient_norm(const ParameterList& params);
/// Rescales gradients so their global norm is at most max_norm.
void clip_gradients(const ParameterList& params, double max_norm);

}  // namespace aeskd::nn
