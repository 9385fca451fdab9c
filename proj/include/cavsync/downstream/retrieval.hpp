// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_DOWNSTREAM_RETRIEVAL_HPP_
#define CAVSYNC_DOWNSTREAM_RETRIEVAL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cavsync/errors.hpp"
#include "cavsync/numerics/tensor.hpp"

namespace cavsync {

enum class Aggregation { kDiagMean, kDiagMax, kBlockMean, kBlockMax };
enum class RetrievalDirection { kVisualToAudio, kAudioToVisual };

inline const char* aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::kDiagMean:
      return "diag_mean";
    case Aggregation::kDiagMax:
      return "diag_max";
    case Aggregation::kBlockMean:
      return "block_mean";
    case Aggregation::kBlockMax:
      return "block_max";
  }
  return "?";
}

inline Aggregation parse_aggregation(const std::string& s) {
  for (Aggregation a : {Aggregation::kDiagMean, Aggregation::kDiagMax, Aggregation::kBlockMean,
                        Aggregation::kBlockMax}) {
    if (s == aggregation_name(a)) return a;
  }
  throw ConfigError("unknown aggregation '" + s +
                    "' (diag_mean|diag_max|block_mean|block_max)");
}

inline const char* retrieval_direction_name(RetrievalDirection d) {
  return d == RetrievalDirection::kVisualToAudio ? "v2a" : "a2v";
}

/// Per-video sequences of unit-norm global vectors, T per modality.
struct EmbeddingSequenceSet {
  std::size_t steps = 0;
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<double> visual;  // [videos * steps * dim]
  std::vector<double> audio;

  std::size_t size() const { return ids.size(); }
  std::span<const double> visual_of(std::size_t v) const {
    return {visual.data() + v * steps * dim, steps * dim};
  }
  std::span<const double> audio_of(std::size_t v) const {
    return {audio.data() + v * steps * dim, steps * dim};
  }

  /// Builds a set from row-stacked outputs [videos * steps, dim], normalising
  /// every row.
  static EmbeddingSequenceSet from_rows(std::vector<std::string> ids, const Tensor& visual,
                                        const Tensor& audio, std::size_t steps) {
    if (visual.shape() != audio.shape() || visual.rank() != 2) {
      throw ShapeError("embedding set: visual " + shape_str(visual.shape()) + " vs audio " +
                       shape_str(audio.shape()));
    }
    if (steps == 0 || visual.rows() != ids.size() * steps) {
      throw ShapeError("embedding set: " + std::to_string(visual.rows()) + " rows for " +
                       std::to_string(ids.size()) + " videos of " + std::to_string(steps) +
                       " steps");
    }
    EmbeddingSequenceSet s;
    s.steps = steps;
    s.dim = visual.cols();
    s.ids = std::move(ids);
    s.visual.assign(visual.data().begin(), visual.data().end());
    s.audio.assign(audio.data().begin(), audio.data().end());
    for (auto* v : {&s.visual, &s.audio}) {
      for (std::size_t r = 0; r < v->size() / s.dim; ++r) {
        double n = 0.0;
        for (std::size_t c = 0; c < s.dim; ++c) n += (*v)[r * s.dim + c] * (*v)[r * s.dim + c];
        n = std::sqrt(n);
        if (!(n > 0.0)) throw NumericError("embedding set: zero-norm vector at row " +
                                           std::to_string(r));
        for (std::size_t c = 0; c < s.dim; ++c) (*v)[r * s.dim + c] /= n;
      }
    }
    return s;
  }
};

/// Scores a query sequence against a target sequence through their T x T
/// similarity matrix. Both spans hold T unit vectors of width `dim`.
inline double pair_similarity(std::span<const double> query, std::span<const double> target,
                              std::size_t dim, Aggregation strategy) {
  if (dim == 0 || query.size() % dim != 0 || query.size() != target.size()) {
    throw InputError("pair_similarity: sequence lengths differ (" +
                     std::to_string(query.size() / std::max<std::size_t>(dim, 1)) + " vs " +
                     std::to_string(target.size() / std::max<std::size_t>(dim, 1)) + ")");
  }
  const std::size_t T = query.size() / dim;
  if (T == 0) throw InputError("pair_similarity: empty sequences");
  auto dot = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t c = 0; c < dim; ++c) s += query[i * dim + c] * target[j * dim + c];
    return s;
  };
  double acc = 0.0, best = -std::numeric_limits<double>::infinity();
  switch (strategy) {
    case Aggregation::kDiagMean:
      for (std::size_t t = 0; t < T; ++t) acc += dot(t, t);
      return acc / double(T);
    case Aggregation::kDiagMax:
      for (std::size_t t = 0; t < T; ++t) best = std::max(best, dot(t, t));
      return best;
    case Aggregation::kBlockMean:
      for (std::size_t i = 0; i < T; ++i) {
        for (std::size_t j = 0; j < T; ++j) acc += dot(i, j);
      }
      return acc / double(T * T);
    case Aggregation::kBlockMax:
      for (std::size_t i = 0; i < T; ++i) {
        for (std::size_t j = 0; j < T; ++j) best = std::max(best, dot(i, j));
      }
      return best;
  }
  throw ParameterError("pair_similarity: unknown strategy");
}

/// N x N query-by-target scores. Query i's true match is target i.
struct RankingMatrix {
  std::size_t n = 0;
  std::vector<double> scores;
  RetrievalDirection direction = RetrievalDirection::kVisualToAudio;
  Aggregation strategy = Aggregation::kDiagMean;

  double at(std::size_t i, std::size_t j) const { return scores[i * n + j]; }

  /// Targets of query i, best first; ties go to the lower target index.
  std::vector<std::size_t> ranked(std::size_t i) const {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return at(i, a) > at(i, b); });
    return order;
  }

  /// Zero-based position of target j in query i's ranking.
  std::size_t rank_of(std::size_t i, std::size_t j) const {
    const double s = at(i, j);
    std::size_t r = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (at(i, t) > s || (at(i, t) == s && t < j)) ++r;
    }
    return r;
  }
};

inline RankingMatrix build_ranking(const EmbeddingSequenceSet& set, RetrievalDirection direction,
                                   Aggregation strategy) {
  const std::size_t n = set.size();
  if (n < 2) throw InputError("build_ranking: need at least 2 videos, got " + std::to_string(n));
  RankingMatrix R;
  R.n = n;
  R.direction = direction;
  R.strategy = strategy;
  R.scores.resize(n * n);
  const bool v2a = direction == RetrievalDirection::kVisualToAudio;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto q = v2a ? set.visual_of(i) : set.audio_of(i);
      const auto t = v2a ? set.audio_of(j) : set.visual_of(j);
      const double s = pair_similarity(q, t, set.dim, strategy);
      if (!std::isfinite(s)) throw NumericError("build_ranking: non-finite score");
      R.scores[i * n + j] = s;
    }
  }
  return R;
}

/// Fraction of queries whose true match is among the top k targets.
inline double recall_at_k(const RankingMatrix& R, std::size_t k) {
  if (k < 1 || k > R.n) {
    throw ParameterError("recall_at_k: k=" + std::to_string(k) + " outside [1, " +
                         std::to_string(R.n) + "]");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < R.n; ++i) hits += R.rank_of(i, i) < k ? 1 : 0;
  return double(hits) / double(R.n);
}

}  // namespace cavsync

#endif  // CAVSYNC_DOWNSTREAM_RETRIEVAL_HPP_
