// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/batching.hpp"

#include <numeric>
#include <random>

#include <fmt/format.h>

#include "aeskd/errors.hpp"
#include "aeskd/rng.hpp"

namespace aeskd {

void BatchPlan::validate() const {
  if (b_s < 1) throw ConfigError("batch plan needs b_s >= 1");
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 gen(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(gen() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

namespace {

constexpr std::uint64_t kLabeledStream = 1;
constexpr std::uint64_t kUnlabeledStream = 2;

}  // namespace

BatchComposer::BatchComposer(std::size_t labeled_size, std::size_t unlabeled_size, BatchPlan plan,
                             std::uint64_t epoch_seed)
    : plan_(plan), epoch_seed_(epoch_seed), unlabeled_size_(unlabeled_size) {
  plan_.validate();
  if (labeled_size < plan_.b_s) {
    throw ArgumentError(fmt::format("labeled manifest has {} samples, fewer than b_s = {}",
                                    labeled_size, plan_.b_s));
  }
  if (plan_.mu > 0 && unlabeled_size == 0) {
    throw ArgumentError("mu > 0 needs a non-empty unlabeled manifest");
  }
  labeled_order_ = permutation(labeled_size, mix_seed({epoch_seed_, kLabeledStream}));
  if (plan_.mu > 0) {
    unlabeled_order_ = permutation(unlabeled_size_, mix_seed({epoch_seed_, kUnlabeledStream, 0}));
  }
}

std::size_t BatchComposer::take_unlabeled() {
  if (unlabeled_pos_ == unlabeled_order_.size()) {
    ++unlabeled_cycle_;
    unlabeled_order_ =
        permutation(unlabeled_size_, mix_seed({epoch_seed_, kUnlabeledStream, unlabeled_cycle_}));
    unlabeled_pos_ = 0;
  }
  return unlabeled_order_[unlabeled_pos_++];
}

std::optional<MixedBatch> BatchComposer::next() {
  if (labeled_pos_ + plan_.b_s > labeled_order_.size()) return std::nullopt;
  MixedBatch batch;
  batch.labeled.assign(labeled_order_.begin() + static_cast<std::ptrdiff_t>(labeled_pos_),
                       labeled_order_.begin() + static_cast<std::ptrdiff_t>(labeled_pos_ + plan_.b_s));
  labeled_pos_ += plan_.b_s;
  batch.unlabeled.reserve(plan_.unlabeled_per_batch());
  for (std::size_t i = 0; i < plan_.unlabeled_per_batch(); ++i) batch.unlabeled.push_back(take_unlabeled());
  return batch;
}

std::vector<MixedBatch> compose_batches(const Manifest& labeled, const Manifest& unlabeled,
                                        const BatchPlan& plan, std::uint64_t epoch_seed) {
  BatchComposer composer(labeled.size(), unlabeled.size(), plan, epoch_seed);
  std::vector<MixedBatch> out;
  while (auto b = composer.next()) out.push_back(std::move(*b));
  return out;
}

}  // namespace aeskd
