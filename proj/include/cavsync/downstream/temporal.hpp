// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_DOWNSTREAM_TEMPORAL_HPP_
#define CAVSYNC_DOWNSTREAM_TEMPORAL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "cavsync/errors.hpp"

namespace cavsync {

using FeatureRows = std::vector<std::vector<double>>;

struct TemporalSegmentOptions {
  std::size_t bisection_steps = 50;
  std::size_t kmeans_iterations = 100;
  std::uint64_t kmeans_seed = 0;
};

struct TemporalSegmentation {
  std::vector<std::size_t> labels;
  bool used_fallback = false;
  double threshold = 0.0;  // distance threshold found by bisection
};

namespace detail {

inline FeatureRows unit_rows(const FeatureRows& x) {
  FeatureRows out = x;
  const std::size_t dim = x.front().size();
  for (auto& row : out) {
    if (row.size() != dim) throw ShapeError("temporal_segment: ragged feature rows");
    double n = 0.0;
    for (double v : row) n += v * v;
    n = std::sqrt(n);
    if (!(n > 0.0)) throw NumericError("temporal_segment: zero-norm feature vector");
    for (double& v : row) v /= n;
  }
  return out;
}

/// Average-linkage merge sequence on a cosine-distance matrix. Entry i of
/// the result is the linkage distance of the (i+1)-th merge; merges are
/// recorded as pairs of cluster representatives.
struct Dendrogram {
  std::vector<double> heights;
  std::vector<std::pair<std::size_t, std::size_t>> merges;
};

inline Dendrogram average_linkage(const FeatureRows& unit) {
  const std::size_t n = unit.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < unit[i].size(); ++c) dot += unit[i][c] * unit[j][c];
      d[i][j] = d[j][i] = 1.0 - dot;
    }
  }
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> alive(n, true);
  Dendrogram out;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (alive[j] && d[i][j] < best) {
          best = d[i][j];
          bi = i;
          bj = j;
        }
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      if (!alive[k] || k == bi || k == bj) continue;
      const double v = (double(size[bi]) * d[bi][k] + double(size[bj]) * d[bj][k]) /
                       double(size[bi] + size[bj]);
      d[bi][k] = d[k][bi] = v;
    }
    size[bi] += size[bj];
    alive[bj] = false;
    out.heights.push_back(best);
    out.merges.emplace_back(bi, bj);
  }
  return out;
}

/// Cluster ids after applying every merge whose height is below `threshold`.
inline std::vector<std::size_t> cut(const Dendrogram& tree, std::size_t n, double threshold) {
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t m = 0; m < tree.heights.size(); ++m) {
    if (!(tree.heights[m] < threshold)) break;
    parent[find(tree.merges[m].second)] = find(tree.merges[m].first);
  }
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = find(i);
  return out;
}

inline std::size_t count_distinct(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return std::size_t(std::unique(v.begin(), v.end()) - v.begin());
}

inline std::vector<std::size_t> kmeans(const FeatureRows& x, std::size_t k,
                                       const TemporalSegmentOptions& opt) {
  const std::size_t n = x.size(), dim = x.front().size();
  auto dist2 = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    return s;
  };
  std::mt19937_64 rng(opt.kmeans_seed);
  FeatureRows centres{x[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]};
  while (centres.size() < k) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centres) best = std::min(best, dist2(x[i], c));
      w[i] = best;
    }
    double total = 0.0;
    for (double v : w) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (pick = 0; pick + 1 < n && r >= w[pick]; ++pick) r -= w[pick];
    }
    centres.push_back(x[pick]);
  }
  std::vector<std::size_t> label(n, 0);
  for (std::size_t it = 0; it < opt.kmeans_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c) {
        if (dist2(x[i], centres[c]) < dist2(x[i], centres[best])) best = c;
      }
      changed = changed || best != label[i] || it == 0;
      label[i] = best;
    }
    if (!changed) break;
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<double> mean(dim, 0.0);
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != c) continue;
        for (std::size_t d = 0; d < dim; ++d) mean[d] += x[i][d];
        ++count;
      }
      if (count == 0) continue;
      for (double& v : mean) v /= double(count);
      centres[c] = mean;
    }
  }
  return label;
}

inline std::vector<std::size_t> renumber(const std::vector<std::size_t>& raw) {
  std::vector<std::size_t> seen, out;
  for (std::size_t r : raw) {
    auto it = std::find(seen.begin(), seen.end(), r);
    if (it == seen.end()) {
      out.push_back(seen.size());
      seen.push_back(r);
    } else {
      out.push_back(std::size_t(it - seen.begin()));
    }
  }
  return out;
}

}  // namespace detail

/// Splits T per-timestep feature vectors into k clusters: average-linkage
/// agglomeration under cosine distance with the cut threshold bisected over
/// [0, 2]; seeded k-means when bisection does not land on exactly k.
/// Labels are numbered in order of first occurrence.
inline TemporalSegmentation temporal_segment(const FeatureRows& features, std::size_t k,
                                             const TemporalSegmentOptions& opt = {}) {
  const std::size_t n = features.size();
  if (n == 0) throw InputError("temporal_segment: no timesteps");
  if (k < 1 || k > n) {
    throw ParameterError("temporal_segment: k=" + std::to_string(k) + " outside [1, " +
                         std::to_string(n) + "]");
  }
  const FeatureRows unit = detail::unit_rows(features);
  const detail::Dendrogram tree = detail::average_linkage(unit);
  TemporalSegmentation out;
  double lo = 0.0, hi = 2.0;
  for (std::size_t it = 0; it < opt.bisection_steps; ++it) {
    const double mid = 0.5 * (lo + hi);
    const auto ids = detail::cut(tree, n, mid);
    const std::size_t c = detail::count_distinct(ids);
    if (c == k) {
      out.labels = detail::renumber(ids);
      out.threshold = mid;
      return out;
    }
    (c > k ? lo : hi) = mid;
  }
  out.used_fallback = true;
  out.labels = detail::renumber(detail::kmeans(unit, k, opt));
  return out;
}

/// Indices t where labels[t] != labels[t-1].
inline std::vector<std::size_t> segment_boundaries(const std::vector<std::size_t>& labels) {
  std::vector<std::size_t> out;
  for (std::size_t t = 1; t < labels.size(); ++t) {
    if (labels[t] != labels[t - 1]) out.push_back(t);
  }
  return out;
}

/// Fraction of true boundaries with a predicted boundary within `tolerance`
/// frames. 1 when there are no true boundaries.
inline double boundary_recall(const std::vector<std::size_t>& truth,
                              const std::vector<std::size_t>& predicted, std::size_t tolerance) {
  if (truth.empty()) return 1.0;
  std::size_t hit = 0;
  for (std::size_t b : truth) {
    for (std::size_t p : predicted) {
      if ((p > b ? p - b : b - p) <= tolerance) {
        ++hit;
        break;
      }
    }
  }
  return double(hit) / double(truth.size());
}

}  // namespace cavsync

#endif  // CAVSYNC_DOWNSTREAM_TEMPORAL_HPP_
