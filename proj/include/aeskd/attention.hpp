// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

namespace aeskd {

/// Attention of one transformer layer for one image: one row-stochastic
/// (tokens x tokens) matrix per head. When cls_present, token 0 is the CLS
/// token and tokens 1.. are patches in row-major grid order.
struct AttentionMap {
  std::vector<Eigen::MatrixXd> heads;
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  bool cls_present = true;

  std::size_t tokens() const noexcept { return grid_h * grid_w + (cls_present ? 1 : 0); }
  /// Throws ValidationError on a bad shape or a row that does not sum to 1.
  void validate(double tol = 1e-5) const;
};

struct DistanceStats {
  double mean = 0.0;
  double std = 0.0;  // population std over (head, spatial query) values
};

/// Attention-weighted patch-grid distance from each spatial query to the
/// spatial keys. CLS key mass is dropped and the remaining row renormalized.
DistanceStats mean_attention_distance(const AttentionMap& map);

/// Per (head, spatial query) distances, head-major; the population behind
/// mean_attention_distance.
std::vector<double> attention_distances(const AttentionMap& map);

/// Mean Shannon entropy (nats) of every full attention row, CLS included.
double mean_attention_entropy(const AttentionMap& map);

struct LayerAttentionStats {
  double mean_distance = 0.0;
  double distance_std = 0.0;
  double mean_entropy = 0.0;
};

struct AttentionStats {
  std::vector<LayerAttentionStats> per_layer;
};

/// Aggregates a probe set: maps[image][layer]. Distances are pooled over
/// images, heads and queries; entropy is averaged over the same population.
AttentionStats summarize_attention(std::span<const std::vector<AttentionMap>> maps);

struct LayerAttentionDelta {
  LayerAttentionStats before;
  LayerAttentionStats after;
  double d_mean_distance = 0.0;
  double d_distance_std = 0.0;
  double d_mean_entropy = 0.0;
};

struct AttentionComparison {
  std::vector<LayerAttentionDelta> per_layer;
};

/// after - before, layer by layer. Throws ShapeError on a depth mismatch.
AttentionComparison compare_stats(const AttentionStats& before, const AttentionStats& after);

void to_json(nlohmann::json& j, const AttentionComparison& c);
void from_json(const nlohmann::json& j, AttentionComparison& c);

}  // namespace aeskd
