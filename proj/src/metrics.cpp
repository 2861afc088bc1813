// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#include "aeskd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "aeskd/errors.hpp"

namespace aeskd {

std::vector<EvalPair> make_pairs(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw ShapeError("prediction and truth lengths differ");
  std::vector<EvalPair> pairs(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) pairs[i] = {{pred[i]}, {truth[i]}};
  return pairs;
}

double mse(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw ArgumentError("mse of an empty sample");
  double total = 0.0;
  for (const auto& p : pairs) {
    const double e = p.pred.value - p.truth.value;
    total += e * e;
  }
  return total / static_cast<double>(pairs.size());
}

namespace {

double pearson(std::span<const double> x, std::span<const double> y, const char* what) {
  const std::size_t n = x.size();
  if (n < 2) throw ArgumentError(fmt::format("{} needs at least 2 samples, got {}", what, n));
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw DegenerateInputError(fmt::format("{}: a series has zero variance", what));
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

void split(std::span<const EvalPair> pairs, std::vector<double>& pred, std::vector<double>& truth) {
  pred.resize(pairs.size());
  truth.resize(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    pred[i] = pairs[i].pred.value;
    truth[i] = pairs[i].truth.value;
  }
}

}  // namespace

double plcc(std::span<const EvalPair> pairs) {
  std::vector<double> pred;
  std::vector<double> truth;
  split(pairs, pred, truth);
  return pearson(pred, truth, "plcc");
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    // Positions i..j-1 (0-based) share rank mean(i+1..j).
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double srcc(std::span<const EvalPair> pairs) {
  std::vector<double> pred;
  std::vector<double> truth;
  split(pairs, pred, truth);
  const auto rp = average_ranks(pred);
  const auto rt = average_ranks(truth);
  return pearson(rp, rt, "srcc");
}

MetricsReport evaluate(std::span<const EvalPair> pairs) {
  MetricsReport r;
  r.n = pairs.size();
  r.mse = mse(pairs);
  r.srcc = srcc(pairs);
  r.plcc = plcc(pairs);
  return r;
}

void IerConfig::validate() const {
  if (intervals < 1) throw ConfigError("ier interval count must be >= 1");
  if (!(tolerance > 0.0)) throw ConfigError("ier tolerance must be positive");
  if (!(lo < hi)) throw ConfigError("ier range must satisfy lo < hi");
}

std::vector<double> interval_bounds(const IerConfig& cfg) {
  cfg.validate();
  std::vector<double> bounds(cfg.intervals + 1);
  const double width = (cfg.hi - cfg.lo) / static_cast<double>(cfg.intervals);
  for (std::size_t k = 0; k < cfg.intervals; ++k) bounds[k] = cfg.lo + width * static_cast<double>(k);
  bounds.back() = cfg.hi;
  return bounds;
}

std::optional<std::size_t> interval_index(std::span<const double> bounds, double score) {
  if (bounds.size() < 2 || !(score >= bounds.front()) || !(score <= bounds.back())) {
    return std::nullopt;
  }
  const auto it = std::upper_bound(bounds.begin(), bounds.end(), score);
  const auto k = static_cast<std::size_t>(it - bounds.begin());
  // k == bounds.size() only when score == hi.
  return std::min(k, bounds.size() - 1) - 1;
}

IerReport interval_error_rate(std::span<const EvalPair> pairs, const IerConfig& cfg) {
  const auto bounds = interval_bounds(cfg);
  IerReport report;
  report.tolerance = cfg.tolerance;
  report.intervals.resize(cfg.intervals);
  for (std::size_t k = 0; k < cfg.intervals; ++k) {
    report.intervals[k].lo = bounds[k];
    report.intervals[k].hi = bounds[k + 1];
  }
  for (const auto& p : pairs) {
    const auto k = interval_index(bounds, p.truth.value);
    if (!k) {
      ++report.out_of_range;
      continue;
    }
    auto& iv = report.intervals[*k];
    ++iv.count;
    if (std::abs(p.pred.value - p.truth.value) > cfg.tolerance) ++iv.errors;
  }
  for (auto& iv : report.intervals) {
    if (iv.count > 0) iv.rate = static_cast<double>(iv.errors) / static_cast<double>(iv.count);
  }
  return report;
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = {{"mse", r.mse}, {"srcc", r.srcc}, {"plcc", r.plcc}, {"n", r.n}};
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
  j.at("mse").get_to(r.mse);
  j.at("srcc").get_to(r.srcc);
  j.at("plcc").get_to(r.plcc);
  j.at("n").get_to(r.n);
}

void to_json(nlohmann::json& j, const IerReport& r) {
  auto intervals = nlohmann::json::array();
  for (const auto& iv : r.intervals) {
    intervals.push_back({{"lo", iv.lo},
                         {"hi", iv.hi},
                         {"count", iv.count},
                         {"errors", iv.errors},
                         {"rate", iv.rate ? nlohmann::json(*iv.rate) : nlohmann::json(nullptr)}});
  }
  j = {{"tolerance", r.tolerance}, {"out_of_range", r.out_of_range}, {"intervals", intervals}};
}

void from_json(const nlohmann::json& j, IerReport& r) {
  j.at("tolerance").get_to(r.tolerance);
  j.at("out_of_range").get_to(r.out_of_range);
  r.intervals.clear();
  for (const auto& e : j.at("intervals")) {
    IerInterval iv;
    e.at("lo").get_to(iv.lo);
    e.at("hi").get_to(iv.hi);
    e.at("count").get_to(iv.count);
    e.at("errors").get_to(iv.errors);
    if (!e.at("rate").is_null()) iv.rate = e.at("rate").get<double>();
    r.intervals.push_back(iv);
  }
}

}  // namespace aeskd
