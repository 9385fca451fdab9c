// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_MODEL_CLASSIFIER_HPP_
#define CAVSYNC_MODEL_CLASSIFIER_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cavsync/errors.hpp"
#include "cavsync/model/layers.hpp"
#include "cavsync/numerics/ops.hpp"

namespace cavsync {

enum class ModalitySelect { kAudio, kVisual, kBoth };

struct ClassifierConfig {
  std::size_t input_dim = 0;
  std::size_t width = 64;
  std::size_t heads = 4;
  std::size_t depth = 2;
  std::size_t mlp_ratio = 4;
  std::size_t num_classes = 0;
  double ln_eps = 1e-6;
};

/// CLS token + small transformer + linear head over a sequence of
/// per-timestep feature vectors.
struct ClassifierHead {
  ClassifierConfig config;
  Linear input;
  Tensor cls_token;  // [1, width]
  std::vector<TransformerBlock> blocks;
  LayerNorm norm;
  Linear head;

  static ClassifierHead init(const ClassifierConfig& cfg, std::uint64_t seed) {
    if (cfg.input_dim == 0 || cfg.num_classes == 0 || cfg.width % cfg.heads != 0 ||
        cfg.width % 2 != 0) {
      throw ConfigError("classifier: invalid input_dim/num_classes/width/heads");
    }
    InitRng rng(seed);
    ClassifierHead h;
    h.config = cfg;
    h.input = Linear::init(cfg.input_dim, cfg.width, rng);
    h.cls_token = normal_param({1, cfg.width}, 0.02, rng);
    for (std::size_t i = 0; i < cfg.depth; ++i) {
      h.blocks.push_back(TransformerBlock::init(cfg.width, cfg.heads, cfg.width * cfg.mlp_ratio,
                                                cfg.ln_eps, rng));
    }
    h.norm = LayerNorm::init(cfg.width, cfg.ln_eps);
    h.head = Linear::init(cfg.width, cfg.num_classes, rng);
    return h;
  }

  ParamList parameters() const {
    ParamList out;
    input.collect(out, "classifier.input", "classifier");
    out.push_back({"classifier.cls_token", "classifier", cls_token});
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      blocks[i].collect(out, "classifier.block." + std::to_string(i), "classifier");
    }
    norm.collect(out, "classifier.norm", "classifier");
    head.collect(out, "classifier.head", "classifier");
    return out;
  }
};

/// Per-timestep classifier input: the selected modality's features, or both
/// joined along the feature axis (audio first).
inline Tensor build_classifier_input(const Tensor& audio, const Tensor& visual,
                                     ModalitySelect select) {
  switch (select) {
    case ModalitySelect::kAudio:
      return audio;
    case ModalitySelect::kVisual:
      return visual;
    case ModalitySelect::kBoth:
      return ops::concat_cols({audio, visual});
  }
  throw ParameterError("build_classifier_input: unknown modality selector");
}

/// Logits [videos, classes] for `features` = [videos * steps, input_dim].
///
/// Each video's sequence is prefixed with the CLS token, giving steps + 1
/// positions; the CLS output feeds the linear head.
inline Tensor classify(const Tensor& features, std::size_t steps, const ClassifierHead& head) {
  if (steps == 0) throw InputError("classify: empty timestep sequence");
  if (features.rows() % steps != 0) {
    throw ShapeError("classify: " + std::to_string(features.rows()) +
                     " rows is not a whole number of " + std::to_string(steps) + "-step videos");
  }
  if (features.cols() != head.config.input_dim) {
    throw ShapeError("classify: features of width " + std::to_string(features.cols()) +
                     " for a head expecting " + std::to_string(head.config.input_dim));
  }
  const std::size_t videos = features.rows() / steps, len = steps + 1;
  const Tensor x = head.input(features);
  const Tensor pool = ops::concat_rows({head.cls_token, x});
  std::vector<std::size_t> index, pos_index, cls_rows;
  for (std::size_t v = 0; v < videos; ++v) {
    cls_rows.push_back(v * len);
    index.push_back(0);
    pos_index.push_back(0);
    for (std::size_t t = 0; t < steps; ++t) {
      index.push_back(1 + v * steps + t);
      pos_index.push_back(t + 1);
    }
  }
  Tensor seq = ops::gather_rows(pool, index);
  seq = ops::add(seq, ops::gather_rows(sincos_1d(head.config.width, len), pos_index));
  for (const auto& blk : head.blocks) seq = blk(seq, len);
  seq = head.norm(seq);
  return head.head(ops::gather_rows(seq, cls_rows));
}

}  // namespace cavsync

#endif  // CAVSYNC_MODEL_CLASSIFIER_HPP_
