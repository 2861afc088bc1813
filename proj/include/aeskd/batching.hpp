// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "aeskd/manifest.hpp"

namespace aeskd {

/// Composition of one semi-supervised batch: b_s labeled samples followed by
/// mu * b_s unlabeled samples.
struct BatchPlan {
  std::size_t b_s = 1;
  std::size_t mu = 0;

  std::size_t unlabeled_per_batch() const noexcept { return mu * b_s; }
  std::size_t total() const noexcept { return b_s + mu * b_s; }
  void validate() const;
};

/// Indices into the labeled and unlabeled manifests.
struct MixedBatch {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
};

/// Deterministic Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

/// One epoch of mixed batches. The labeled segment walks a per-epoch
/// permutation, so every labeled sample appears once; a tail shorter than
/// b_s is dropped. The unlabeled segment draws from its own permutation and
/// reshuffles whenever the pool runs out. The whole epoch is a pure function
/// of (sizes, plan, epoch_seed).
class BatchComposer {
 public:
  BatchComposer(std::size_t labeled_size, std::size_t unlabeled_size, BatchPlan plan,
                std::uint64_t epoch_seed);

  std::optional<MixedBatch> next();
  std::size_t batches_per_epoch() const noexcept { return labeled_order_.size() / plan_.b_s; }

 private:
  std::size_t take_unlabeled();

  BatchPlan plan_;
  std::uint64_t epoch_seed_;
  std::size_t unlabeled_size_;
  std::vector<std::size_t> labeled_order_;
  std::vector<std::size_t> unlabeled_order_;
  std::size_t labeled_pos_ = 0;
  std::size_t unlabeled_pos_ = 0;
  std::uint64_t unlabeled_cycle_ = 0;
};

std::vector<MixedBatch> compose_batches(const Manifest& labeled, const Manifest& unlabeled,
                                        const BatchPlan& plan, std::uint64_t epoch_seed);

}  // namespace aeskd
