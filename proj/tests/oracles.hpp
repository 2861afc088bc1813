// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The aeskd Authors

#pragma once

// Brute-force reference implementations, written from the textbook
// definitions without sharing code with the library.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// CDF_p(k) = sum_{i<=k} p_i, each entry summed from scratch.
inline double emd(const std::vector<double>& p, const std::vector<double>& q, double r) {
  const std::size_t d = p.size();
  double total = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    double cp = 0.0, cq = 0.0;
    for (std::size_t i = 0; i <= k; ++i) {
      cp += p[i];
      cq += q[i];
    }
    total += std::pow(std::fabs(cp - cq), r);
  }
  return std::pow(total / static_cast<double>(d), 1.0 / r);
}

inline double cosine_alignment(const std::vector<double>& a, const std::vector<double>& b, double eps) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return 1.0 - dot / std::max(std::sqrt(na) * std::sqrt(nb), eps);
}

inline double mean(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double mse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

/// r = sum (x - mx)(y - my) / sqrt(sum (x - mx)^2 sum (y - my)^2)
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Fractional rank by counting: 1 + #smaller + (#equal - 1) / 2.
inline std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t less = 0, equal = 0;
    for (double v : x) {
      if (v < x[i]) ++less;
      if (v == x[i]) ++equal;
    }
    out[i] = 1.0 + static_cast<double>(less) + (static_cast<double>(equal) - 1.0) / 2.0;
  }
  return out;
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(ranks(x), ranks(y));
}

struct DistanceEntropy {
  double mean_distance;
  double distance_std;
  double entropy;
};

/// Per-head attention over (1 CLS +) g*g patch tokens. Every spatial query
/// row's spatial mass is renormalized; distances in patch units.
inline DistanceEntropy attention_stats(const std::vector<Eigen::MatrixXd>& heads, int g, bool cls) {
  const int off = cls ? 1 : 0;
  std::vector<double> dists;
  double ent = 0.0;
  std::size_t rows = 0;
  for (const auto& a : heads) {
    for (int q = 0; q < a.rows(); ++q) {
      double h = 0.0;
      for (int k = 0; k < a.cols(); ++k) {
        if (a(q, k) > 0.0) h -= a(q, k) * std::log(a(q, k));
      }
      ent += h;
      ++rows;
    }
    for (int qi = 0; qi < g * g; ++qi) {
      double mass = 0.0, acc = 0.0;
      for (int ki = 0; ki < g * g; ++ki) {
        const double w = a(qi + off, ki + off);
        const double dy = qi / g - ki / g, dx = qi % g - ki % g;
        mass += w;
        acc += w * std::sqrt(dy * dy + dx * dx);
      }
      dists.push_back(mass > 0.0 ? acc / mass : 0.0);
    }
  }
  const double m = mean(dists);
  double var = 0.0;
  for (double d : dists) var += (d - m) * (d - m);
  return {m, std::sqrt(var / static_cast<double>(dists.size())), ent / static_cast<double>(rows)};
}

}  // namespace oracle

namespace testutil {

inline std::vector<double> random_simplex(std::size_t d, std::mt19937_64& gen) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> p(d);
  double s = 0.0;
  for (auto& v : p) s += (v = e(gen));
  for (auto& v : p) v /= s;
  return p;
}

inline std::vector<double> random_vector(std::size_t d, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> x(d);
  for (auto& v : x) v = n(gen);
  return x;
}

/// ||a - n|| / max(||a||, ||n||), zero when both vanish.
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::max(std::sqrt(na), std::sqrt(nn));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

/// Central differences of f at x.
template <typename F>
std::vector<double> numeric_gradient(F&& f, std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace testutil
