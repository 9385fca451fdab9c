// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_DOWNSTREAM_SEGMENTATION_HPP_
#define CAVSYNC_DOWNSTREAM_SEGMENTATION_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cavsync/errors.hpp"
#include "cavsync/model/encoder.hpp"

namespace cavsync {

struct SegmentationScore {
  double ap = 0.0;
  double iou = 0.0;
  double threshold = 0.0;
};

/// Average precision of pixel scores against a binary mask: sum over
/// distinct score thresholds of (recall gain) x precision.
inline double average_precision(const std::vector<double>& scores,
                                const std::vector<std::uint8_t>& truth) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double positives = double(std::count(truth.begin(), truth.end(), std::uint8_t{1}));
  double ap = 0.0, prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < n;) {
    const double s = scores[order[i]];
    while (i < n && scores[order[i]] == s) {
      tp += truth[order[i]];
      ++seen;
      ++i;
    }
    const double recall = double(tp) / positives;
    ap += (recall - prev_recall) * (double(tp) / double(seen));
    prev_recall = recall;
  }
  return ap;
}

/// AP and IoU of a prediction map against a binary ground-truth mask.
///
/// IoU binarises the prediction at `threshold`, or at the map's own mean
/// when none is given (pixels >= threshold are foreground). Returns nullopt
/// for an empty mask.
inline std::optional<SegmentationScore> segmentation_scores(
    const Map2D& pred, const std::vector<std::uint8_t>& gt,
    std::optional<double> threshold = std::nullopt) {
  if (pred.values.size() != gt.size() || pred.rows * pred.cols != gt.size()) {
    throw ShapeError("segmentation_scores: prediction " + std::to_string(pred.rows) + "x" +
                     std::to_string(pred.cols) + " vs mask of " + std::to_string(gt.size()) +
                     " pixels");
  }
  for (std::uint8_t g : gt) {
    if (g > 1) throw InputError("segmentation_scores: mask must be binary");
  }
  if (std::find(gt.begin(), gt.end(), std::uint8_t{1}) == gt.end()) return std::nullopt;
  SegmentationScore out;
  out.ap = average_precision(pred.values, gt);
  out.threshold = threshold.value_or(
      std::accumulate(pred.values.begin(), pred.values.end(), 0.0) / double(gt.size()));
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool p = pred.values[i] >= out.threshold;
    inter += (p && gt[i]) ? 1 : 0;
    uni += (p || gt[i]) ? 1 : 0;
  }
  out.iou = double(inter) / double(uni);
  return out;
}

}  // namespace cavsync

#endif  // CAVSYNC_DOWNSTREAM_SEGMENTATION_HPP_
