// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_OBJECTIVES_HPP_
#define CAVSYNC_OBJECTIVES_HPP_

#include <cmath>
#include <cstddef>
#include <string>

#include "cavsync/errors.hpp"
#include "cavsync/numerics/ops.hpp"

namespace cavsync {

enum class ContrastiveDirection { kVisualToAudio, kAudioToVisual, kSymmetric };

/// How a sample's summed squared error over its masked patches is
/// normalised: by patch count times patch length (per-element mean), or by
/// patch count alone.
enum class ReconNormalization { kPerElement, kPerPatch };

/// InfoNCE over cosine similarities of global vectors.
///
/// Row i of `visual` and row i of `audio` are the positive pair; every other
/// row of the opposite modality is a negative. v2a treats visual rows as
/// queries, a2v audio rows; symmetric averages the two.
inline Tensor contrastive_loss(const Tensor& visual, const Tensor& audio, double temperature,
                               ContrastiveDirection direction) {
  if (!(temperature > 0.0)) throw ParameterError("contrastive_loss: temperature must be > 0");
  if (visual.rank() != 2 || visual.shape() != audio.shape()) {
    throw ShapeError("contrastive_loss: " + shape_str(visual.shape()) + " vs " +
                     shape_str(audio.shape()));
  }
  if (visual.rows() < 2) throw InputError("contrastive_loss: need at least 2 pairs");
  const Tensor sim =
      ops::matmul(ops::l2_normalize_rows(visual), ops::transpose(ops::l2_normalize_rows(audio)));
  auto one_way = [&](const Tensor& s) {
    return ops::scale(ops::mean(ops::diagonal(ops::log_softmax_rows(s, temperature))), -1.0);
  };
  switch (direction) {
    case ContrastiveDirection::kVisualToAudio:
      return one_way(sim);
    case ContrastiveDirection::kAudioToVisual:
      return one_way(ops::transpose(sim));
    case ContrastiveDirection::kSymmetric:
      return ops::scale(ops::add(one_way(sim), one_way(ops::transpose(sim))), 0.5);
  }
  throw ParameterError("contrastive_loss: unknown direction");
}

struct ReconstructionTerms {
  Tensor audio;   // batch mean of per-sample audio terms
  Tensor visual;  // batch mean of per-sample visual terms
  Tensor total;   // audio + visual
};

namespace detail {

inline Tensor recon_term(const Tensor& predicted, const Tensor& target, std::size_t batch,
                         ReconNormalization norm, const char* what) {
  if (!predicted.defined() && !target.defined()) return Tensor::scalar(0.0);
  if (!predicted.defined() || !target.defined() || predicted.shape() != target.shape()) {
    throw ShapeError(std::string("reconstruction_loss: ") + what + " predictions " +
                     (predicted.defined() ? shape_str(predicted.shape()) : "[]") + " vs targets " +
                     (target.defined() ? shape_str(target.shape()) : "[]"));
  }
  if (batch == 0 || predicted.rows() % batch != 0) {
    throw ShapeError(std::string("reconstruction_loss: ") + what +
                     " rows not divisible by batch size");
  }
  // Every sample masks the same number of patches, so the batch mean of
  // per-sample means is one global division.
  const double per_sample = double(predicted.rows() / batch) *
                            (norm == ReconNormalization::kPerElement ? double(predicted.cols()) : 1.0);
  return ops::scale(ops::sum_squares(ops::sub(predicted, target)),
                    1.0 / (double(batch) * per_sample));
}

}  // namespace detail

/// Masked-patch mean squared error for both modalities, averaged over the
/// batch. A modality with nothing masked contributes 0.
inline ReconstructionTerms reconstruction_loss(const Tensor& pred_audio,
                                               const Tensor& target_audio,
                                               const Tensor& pred_visual,
                                               const Tensor& target_visual, std::size_t batch,
                                               ReconNormalization norm) {
  ReconstructionTerms t;
  t.audio = detail::recon_term(pred_audio, target_audio, batch, norm, "audio");
  t.visual = detail::recon_term(pred_visual, target_visual, batch, norm, "visual");
  t.total = ops::add(t.audio, t.visual);
  return t;
}

struct LossWeights {
  double contrastive = 0.1;
  double reconstruction = 1.0;
};

/// Scalar summary of one training step.
struct LossReport {
  double contrastive = 0.0;
  double recon_audio = 0.0;
  double recon_visual = 0.0;
  double reconstruction = 0.0;
  double total = 0.0;
  double temperature = 0.05;
  LossWeights weights;
  ContrastiveDirection direction = ContrastiveDirection::kSymmetric;
};

/// lambda_c * L_c + lambda_r * L_r.
inline Tensor total_loss(const Tensor& contrastive, const Tensor& reconstruction,
                         const LossWeights& w) {
  if (w.contrastive < 0.0 || w.reconstruction < 0.0) {
    throw ParameterError("total_loss: weights must be non-negative");
  }
  return ops::add(ops::scale(contrastive, w.contrastive),
                  ops::scale(reconstruction, w.reconstruction));
}

inline LossReport make_report(const Tensor& contrastive, const ReconstructionTerms& recon,
                              const Tensor& total, double temperature, const LossWeights& w,
                              ContrastiveDirection direction) {
  LossReport r;
  r.contrastive = contrastive.item();
  r.recon_audio = recon.audio.item();
  r.recon_visual = recon.visual.item();
  r.reconstruction = recon.total.item();
  r.total = total.item();
  r.temperature = temperature;
  r.weights = w;
  r.direction = direction;
  return r;
}

inline const char* direction_name(ContrastiveDirection d) {
  switch (d) {
    case ContrastiveDirection::kVisualToAudio:
      return "v2a";
    case ContrastiveDirection::kAudioToVisual:
      return "a2v";
    case ContrastiveDirection::kSymmetric:
      return "symmetric";
  }
  return "?";
}

inline ContrastiveDirection parse_direction(const std::string& s) {
  if (s == "v2a") return ContrastiveDirection::kVisualToAudio;
  if (s == "a2v") return ContrastiveDirection::kAudioToVisual;
  if (s == "symmetric") return ContrastiveDirection::kSymmetric;
  throw ConfigError("unknown contrastive direction '" + s + "' (v2a|a2v|symmetric)");
}

}  // namespace cavsync

#endif  // CAVSYNC_OBJECTIVES_HPP_
