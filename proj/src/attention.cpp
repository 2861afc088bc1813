// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/attention.hpp"

#include <cmath>

#include <fmt/format.h>

#include "aeskd/errors.hpp"

namespace aeskd {

void AttentionMap::validate(double tol) const {
  const auto n = static_cast<Eigen::Index>(tokens());
  if (heads.empty()) throw ValidationError("attention map has no heads");
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const auto& a = heads[h];
    if (a.rows() != n || a.cols() != n) {
      throw ValidationError(fmt::format("head {} is {}x{}, expected {}x{}", h, a.rows(), a.cols(), n, n));
    }
    for (Eigen::Index q = 0; q < n; ++q) {
      if ((a.row(q).array() < 0.0).any()) {
        throw ValidationError(fmt::format("negative attention in head {} row {}", h, q));
      }
      const double s = a.row(q).sum();
      if (std::abs(s - 1.0) > tol) {
        throw ValidationError(fmt::format("head {} row {} sums to {}", h, q, s));
      }
    }
  }
}

std::vector<double> attention_distances(const AttentionMap& map) {
  map.validate();
  const std::size_t spatial = map.grid_h * map.grid_w;
  if (spatial == 0) throw ArgumentError("attention map has no spatial tokens");
  const std::size_t offset = map.cls_present ? 1 : 0;

  // Pairwise patch distances in grid units.
  Eigen::MatrixXd dist(spatial, spatial);
  for (std::size_t a = 0; a < spatial; ++a) {
    const double ya = static_cast<double>(a / map.grid_w);
    const double xa = static_cast<double>(a % map.grid_w);
    for (std::size_t b = 0; b < spatial; ++b) {
      const double dy = ya - static_cast<double>(b / map.grid_w);
      const double dx = xa - static_cast<double>(b % map.grid_w);
      dist(a, b) = std::sqrt(dy * dy + dx * dx);
    }
  }

  std::vector<double> out;
  out.reserve(map.heads.size() * spatial);
  const auto s = static_cast<Eigen::Index>(spatial);
  const auto o = static_cast<Eigen::Index>(offset);
  for (const auto& a : map.heads) {
    const auto block = a.block(o, o, s, s);
    for (Eigen::Index q = 0; q < s; ++q) {
      const double mass = block.row(q).sum();
      // A query that only looks at CLS has no spatial extent.
      if (!(mass > 0.0)) {
        out.push_back(0.0);
        continue;
      }
      out.push_back(block.row(q).dot(dist.row(q)) / mass);
    }
  }
  return out;
}

DistanceStats mean_attention_distance(const AttentionMap& map) {
  const auto d = attention_distances(map);
  DistanceStats stats;
  for (double v : d) stats.mean += v;
  stats.mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double v : d) var += (v - stats.mean) * (v - stats.mean);
  stats.std = std::sqrt(var / static_cast<double>(d.size()));
  return stats;
}

namespace {

double row_entropy(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  double h = 0.0;
  for (Eigen::Index k = 0; k < row.size(); ++k) {
    if (row[k] > 0.0) h -= row[k] * std::log(row[k]);
  }
  return h;
}

std::vector<double> attention_entropies(const AttentionMap& map) {
  map.validate();
  std::vector<double> out;
  for (const auto& a : map.heads) {
    for (Eigen::Index q = 0; q < a.rows(); ++q) out.push_back(row_entropy(a.row(q)));
  }
  return out;
}

}  // namespace

double mean_attention_entropy(const AttentionMap& map) {
  const auto h = attention_entropies(map);
  double total = 0.0;
  for (double v : h) total += v;
  return total / static_cast<double>(h.size());
}

AttentionStats summarize_attention(std::span<const std::vector<AttentionMap>> maps) {
  if (maps.empty()) throw ArgumentError("no attention maps to summarize");
  const std::size_t depth = maps.front().size();
  AttentionStats stats;
  stats.per_layer.resize(depth);
  for (std::size_t layer = 0; layer < depth; ++layer) {
    std::vector<double> distances;
    std::vector<double> entropies;
    for (const auto& image : maps) {
      if (image.size() != depth) throw ShapeError("probe images captured different depths");
      const auto d = attention_distances(image[layer]);
      const auto h = attention_entropies(image[layer]);
      distances.insert(distances.end(), d.begin(), d.end());
      entropies.insert(entropies.end(), h.begin(), h.end());
    }
    auto& s = stats.per_layer[layer];
    for (double v : distances) s.mean_distance += v;
    s.mean_distance /= static_cast<double>(distances.size());
    double var = 0.0;
    for (double v : distances) var += (v - s.mean_distance) * (v - s.mean_distance);
    s.distance_std = std::sqrt(var / static_cast<double>(distances.size()));
    for (double v : entropies) s.mean_entropy += v;
    s.mean_entropy /= static_cast<double>(entropies.size());
  }
  return stats;
}

AttentionComparison compare_stats(const AttentionStats& before, const AttentionStats& after) {
  if (before.per_layer.size() != after.per_layer.size()) {
    throw ShapeError(fmt::format("cannot compare {} layers with {} layers", before.per_layer.size(),
                                 after.per_layer.size()));
  }
  AttentionComparison c;
  for (std::size_t i = 0; i < before.per_layer.size(); ++i) {
    const auto& b = before.per_layer[i];
    const auto& a = after.per_layer[i];
    c.per_layer.push_back({b, a, a.mean_distance - b.mean_distance,
                           a.distance_std - b.distance_std, a.mean_entropy - b.mean_entropy});
  }
  return c;
}

namespace {

nlohmann::json stats_json(const LayerAttentionStats& s) {
  return {{"mean_distance", s.mean_distance},
          {"distance_std", s.distance_std},
          {"mean_entropy", s.mean_entropy}};
}

LayerAttentionStats stats_from_json(const nlohmann::json& j) {
  return {j.at("mean_distance").get<double>(), j.at("distance_std").get<double>(),
          j.at("mean_entropy").get<double>()};
}

}  // namespace

void to_json(nlohmann::json& j, const AttentionComparison& c) {
  j = nlohmann::json::array();
  for (std::size_t i = 0; i < c.per_layer.size(); ++i) {
    const auto& l = c.per_layer[i];
    j.push_back({{"layer", i},
                 {"before", stats_json(l.before)},
                 {"after", stats_json(l.after)},
                 {"delta",
                  {{"mean_distance", l.d_mean_distance},
                   {"distance_std", l.d_distance_std},
                   {"mean_entropy", l.d_mean_entropy}}}});
  }
}

void from_json(const nlohmann::json& j, AttentionComparison& c) {
  c.per_layer.clear();
  for (const auto& e : j) {
    LayerAttentionDelta l;
    l.before = stats_from_json(e.at("before"));
    l.after = stats_from_json(e.at("after"));
    const auto& d = e.at("delta");
    l.d_mean_distance = d.at("mean_distance").get<double>();
    l.d_distance_std = d.at("distance_std").get<double>();
    l.d_mean_entropy = d.at("mean_entropy").get<double>();
    c.per_layer.push_back(l);
  }
}

}  // namespace aeskd
