// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_HARNESS_PRETRAIN_HPP_
#define CAVSYNC_HARNESS_PRETRAIN_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavsync/alignment.hpp"
#include "cavsync/errors.hpp"
#include "cavsync/harness/checkpoint.hpp"
#include "cavsync/harness/config.hpp"
#include "cavsync/harness/manifest.hpp"
#include "cavsync/harness/synthetic.hpp"
#include "cavsync/train.hpp"

namespace cavsync {

/// A clip plus the labels evaluation needs, borrowed from a dataset.
struct ClipView {
  const AlignedPair* pair = nullptr;
  std::size_t label = 0;
  std::vector<std::size_t> frame_labels;
};

inline std::vector<ClipView> clip_views(const SyntheticDataset& ds) {
  std::vector<ClipView> out;
  for (const auto& v : ds.videos) out.push_back({&v.pair, v.label, v.frame_classes});
  return out;
}

inline std::vector<ClipView> clip_views(const std::vector<ClipRecord>& clips) {
  std::vector<ClipView> out;
  for (const auto& c : clips) {
    out.push_back({&c.pair, c.labels.empty() ? 0 : c.labels.front(), c.frame_labels});
  }
  return out;
}

struct EpochSummary {
  std::size_t epoch = 0;
  double contrastive = 0.0;
  double recon_audio = 0.0;
  double recon_visual = 0.0;
  double reconstruction = 0.0;
  double total = 0.0;
  double last_lr = 0.0;
};

inline nlohmann::json to_json(const EpochSummary& e) {
  return {{"epoch", e.epoch},
          {"contrastive", e.contrastive},
          {"recon_audio", e.recon_audio},
          {"recon_visual", e.recon_visual},
          {"reconstruction", e.reconstruction},
          {"total", e.total},
          {"lr", e.last_lr}};
}

struct PretrainOptions {
  std::filesystem::path checkpoint_dir;  // empty: no checkpoint
  std::filesystem::path log_path;        // empty: no log
  std::function<void(const EpochSummary&)> on_epoch;
};

struct PretrainResult {
  ModelState state;
  std::vector<EpochSummary> epochs;
  std::size_t steps = 0;
  nlohmann::json metrics;
};

/// Trains a fresh model on `clips`. Everything random (initialisation,
/// clip order, frame choice, masks) derives from cfg.seed.
inline PretrainResult run_pretrain(const RunConfig& cfg, const std::vector<ClipView>& clips,
                                   const PretrainOptions& opt = {}) {
  cfg.validate();
  if (clips.size() < cfg.batch_size) {
    throw InputError("pretrain: " + std::to_string(clips.size()) +
                     " clips is fewer than batch_size " + std::to_string(cfg.batch_size));
  }
  const ObjectiveConfig objective = cfg.objective();
  PretrainResult out{ModelState::init(cfg.model, cfg.seed), {}, 0, {}};
  AdamW optimizer(out.state.parameters(), cfg.optimizer());
  std::mt19937_64 rng(cfg.seed);

  std::ofstream log;
  if (!opt.log_path.empty()) {
    if (opt.log_path.has_parent_path()) std::filesystem::create_directories(opt.log_path.parent_path());
    log.open(opt.log_path, std::ios::trunc);
    if (!log) throw LoadError("cannot open training log " + opt.log_path.string());
  }

  const std::size_t per_epoch = clips.size() / cfg.batch_size;
  const std::size_t total_steps = per_epoch * cfg.epochs;
  const std::size_t warmup =
      std::size_t(std::lround(cfg.warmup_fraction * double(total_steps)));
  std::vector<std::size_t> order(clips.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochSummary sum;
    sum.epoch = epoch;
    for (std::size_t s = 0; s < per_epoch; ++s) {
      std::vector<FrameWindowSample> batch;
      for (std::size_t b = 0; b < cfg.batch_size; ++b) {
        batch.push_back(sample_training_pair(*clips[order[s * cfg.batch_size + b]].pair, rng));
      }
      const double lr = cosine_lr(cfg.learning_rate, out.steps, warmup, total_steps);
      const LossReport r = train_step(batch, out.state, optimizer, objective, lr, rng);
      ++out.steps;
      sum.contrastive += r.contrastive;
      sum.recon_audio += r.recon_audio;
      sum.recon_visual += r.recon_visual;
      sum.reconstruction += r.reconstruction;
      sum.total += r.total;
      sum.last_lr = lr;
      if (log) {
        log << nlohmann::json{{"type", "step"},         {"epoch", epoch},
                              {"step", out.steps},      {"lr", lr},
                              {"seed", cfg.seed},       {"contrastive", r.contrastive},
                              {"recon_audio", r.recon_audio},
                              {"recon_visual", r.recon_visual},
                              {"reconstruction", r.reconstruction},
                              {"total", r.total},       {"temperature", r.temperature},
                              {"lambda_c", r.weights.contrastive},
                              {"lambda_r", r.weights.reconstruction},
                              {"direction", direction_name(r.direction)}}
                   .dump()
            << '\n';
      }
    }
    const double n = double(per_epoch);
    sum.contrastive /= n;
    sum.recon_audio /= n;
    sum.recon_visual /= n;
    sum.reconstruction /= n;
    sum.total /= n;
    if (log) {
      nlohmann::json line = to_json(sum);
      line["type"] = "epoch";
      line["seed"] = cfg.seed;
      log << line.dump() << '\n';
    }
    if (opt.on_epoch) opt.on_epoch(sum);
    out.epochs.push_back(sum);
  }

  if (!opt.checkpoint_dir.empty()) {
    save_checkpoint(opt.checkpoint_dir, out.state, {cfg.seed, out.steps, cfg.epochs});
  }
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : out.epochs) epochs.push_back(to_json(e));
  const EpochSummary& first = out.epochs.front();
  const EpochSummary& last = out.epochs.back();
  out.metrics = {{"task", "pretrain"},
                 {"seed", cfg.seed},
                 {"config", cfg.to_json()},
                 {"parameter_count", out.state.parameter_count()},
                 {"steps", out.steps},
                 {"epochs", epochs},
                 {"first_epoch", to_json(first)},
                 {"last_epoch", to_json(last)},
                 {"total_ratio", last.total / first.total}};
  return out;
}

}  // namespace cavsync

#endif  // CAVSYNC_HARNESS_PRETRAIN_HPP_
