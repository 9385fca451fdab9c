// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_TRAIN_HPP_
#define CAVSYNC_TRAIN_HPP_

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <vector>

#include "cavsync/alignment.hpp"
#include "cavsync/errors.hpp"
#include "cavsync/model/encoder.hpp"
#include "cavsync/model/state.hpp"
#include "cavsync/objectives.hpp"
#include "cavsync/tokenizer.hpp"

namespace cavsync {

struct OptimizerConfig {
  double learning_rate = 2e-4;
  double weight_decay = 5e-7;
  double beta1 = 0.95;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double warmup_fraction = 0.1;
};

/// Linear warmup to the base rate, then cosine decay to zero.
inline double cosine_lr(double base, std::size_t step, std::size_t warmup, std::size_t total) {
  if (step < warmup) return base * double(step + 1) / double(warmup);
  if (total <= warmup) return base;
  const double progress = std::min(1.0, double(step - warmup) / double(total - warmup));
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * progress));
}

/// Adam with decoupled weight decay.
class AdamW {
 public:
  AdamW(ParamList params, OptimizerConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
      m_.emplace_back(p.tensor.numel(), 0.0);
      v_.emplace_back(p.tensor.numel(), 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i].tensor;
      if (!p.has_grad()) continue;
      auto w = p.mutable_data();
      auto g = p.grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
        const double update = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.epsilon);
        w[j] -= lr * (update + cfg_.weight_decay * w[j]);
      }
    }
  }

  std::size_t steps_taken() const { return t_; }

 private:
  ParamList params_;
  OptimizerConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

struct ObjectiveConfig {
  double mask_ratio_audio = 0.75;
  double mask_ratio_visual = 0.75;
  double temperature = 0.05;
  LossWeights weights;
  ContrastiveDirection direction = ContrastiveDirection::kSymmetric;
  ReconNormalization recon_norm = ReconNormalization::kPerElement;
};

/// Graph handles of one forward pass through the pretraining objective.
struct LossGraph {
  Tensor contrastive;
  ReconstructionTerms recon;
  Tensor total;

  LossReport report(const ObjectiveConfig& cfg) const {
    return make_report(contrastive, recon, total, cfg.temperature, cfg.weights, cfg.direction);
  }
};

/// Tokenize, encode, decode and score a batch of (frame, window) samples.
template <class Rng>
LossGraph compute_losses(const std::vector<FrameWindowSample>& batch, const ModelState& state,
                         const ObjectiveConfig& cfg, Rng& rng) {
  if (batch.size() < 2) {
    throw InputError("training batch needs at least 2 samples for contrastive negatives");
  }
  std::vector<FloatArray> windows, frames;
  windows.reserve(batch.size());
  frames.reserve(batch.size());
  for (const auto& s : batch) {
    windows.push_back(s.window);
    frames.push_back(s.frame);
  }
  const std::size_t p = state.config.patch;
  const TokenBatch audio =
      tokenize(windows, p, cfg.mask_ratio_audio, Modality::kAudio, state.embed_audio, rng);
  const TokenBatch visual =
      tokenize(frames, p, cfg.mask_ratio_visual, Modality::kVisual, state.embed_visual, rng);
  const EncodedPair enc = encode(audio, visual, state);
  const Reconstruction rec = decode(enc, state);
  LossGraph g;
  g.contrastive = contrastive_loss(enc.g_visual, enc.g_audio, cfg.temperature, cfg.direction);
  g.recon = reconstruction_loss(rec.audio, audio.original_patches, rec.visual,
                                visual.original_patches, batch.size(), cfg.recon_norm);
  g.total = total_loss(g.contrastive, g.recon.total, cfg.weights);
  return g;
}

/// One forward, one backward, one optimizer update at learning rate `lr`.
template <class Rng>
LossReport train_step(const std::vector<FrameWindowSample>& batch, ModelState& state,
                      AdamW& optimizer, const ObjectiveConfig& cfg, double lr, Rng& rng) {
  state.zero_grad();
  const LossGraph g = compute_losses(batch, state, cfg, rng);
  g.total.backward();
  for (const auto& p : state.parameters()) {
    for (double v : p.tensor.grad()) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + p.name);
    }
  }
  optimizer.step(lr);
  return g.report(cfg);
}

}  // namespace cavsync

#endif  // CAVSYNC_TRAIN_HPP_
