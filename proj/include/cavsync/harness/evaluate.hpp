// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_HARNESS_EVALUATE_HPP_
#define CAVSYNC_HARNESS_EVALUATE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavsync/downstream/probe.hpp"
#include "cavsync/downstream/retrieval.hpp"
#include "cavsync/downstream/segmentation.hpp"
#include "cavsync/downstream/temporal.hpp"
#include "cavsync/errors.hpp"
#include "cavsync/harness/config.hpp"
#include "cavsync/harness/pretrain.hpp"
#include "cavsync/model/classifier.hpp"
#include "cavsync/model/encoder.hpp"
#include "cavsync/train.hpp"

namespace cavsync {

/// Per-timestep representations of every clip, rows [videos * steps, dim].
struct SequenceFeatures {
  std::size_t videos = 0;
  std::size_t steps = 0;
  Tensor audio;
  Tensor visual;
};

/// Unmasked forward passes over every (frame, window) pair of every clip.
/// `source` picks the token class read out; nullopt reads the contrastive
/// representation (global outputs, or pooled patches without globals).
inline SequenceFeatures extract_features(const ModelState& state,
                                         const std::vector<ClipView>& clips,
                                         std::optional<TokenSource> source = std::nullopt,
                                         std::size_t chunk = 64) {
  if (clips.empty()) throw InputError("extract_features: no clips");
  const std::size_t steps = clips.front().pair->num_frames();
  for (const auto& c : clips) {
    if (c.pair->num_frames() != steps) {
      throw InputError("extract_features: clip " + c.pair->id + " has " +
                       std::to_string(c.pair->num_frames()) + " frames, expected " +
                       std::to_string(steps));
    }
  }
  NoGradGuard no_grad;
  std::mt19937_64 unused(0);
  const std::size_t dim = state.config.dim, total = clips.size() * steps;
  std::vector<double> audio, visual;
  audio.reserve(total * dim);
  visual.reserve(total * dim);
  std::vector<FloatArray> frames, windows;
  auto flush = [&] {
    if (frames.empty()) return;
    const TokenBatch a =
        tokenize(windows, state.config.patch, 0.0, Modality::kAudio, state.embed_audio, unused);
    const TokenBatch v =
        tokenize(frames, state.config.patch, 0.0, Modality::kVisual, state.embed_visual, unused);
    const EncodedPair enc = encode(a, v, state);
    const Tensor fa = source ? probe_features(enc, Modality::kAudio, *source) : enc.g_audio;
    const Tensor fv = source ? probe_features(enc, Modality::kVisual, *source) : enc.g_visual;
    audio.insert(audio.end(), fa.data().begin(), fa.data().end());
    visual.insert(visual.end(), fv.data().begin(), fv.data().end());
    frames.clear();
    windows.clear();
  };
  for (const auto& c : clips) {
    for (std::size_t t = 0; t < steps; ++t) {
      frames.push_back(c.pair->frames[t]);
      windows.push_back(window_of(*c.pair, t));
      if (frames.size() == chunk) flush();
    }
  }
  flush();
  return {clips.size(), steps, Tensor({total, dim}, std::move(audio)),
          Tensor({total, dim}, std::move(visual))};
}

/// Recall@{1,5,10} for both directions and all four aggregation strategies.
inline nlohmann::json evaluate_retrieval(const ModelState& state,
                                         const std::vector<ClipView>& clips) {
  const SequenceFeatures f = extract_features(state, clips);
  std::vector<std::string> ids;
  for (const auto& c : clips) ids.push_back(c.pair->id);
  const EmbeddingSequenceSet set =
      EmbeddingSequenceSet::from_rows(std::move(ids), f.visual, f.audio, f.steps);
  nlohmann::json out{{"videos", f.videos}, {"steps", f.steps}, {"chance_r1", 1.0 / double(f.videos)}};
  for (RetrievalDirection d : {RetrievalDirection::kVisualToAudio, RetrievalDirection::kAudioToVisual}) {
    for (Aggregation a : {Aggregation::kDiagMean, Aggregation::kDiagMax, Aggregation::kBlockMean,
                          Aggregation::kBlockMax}) {
      const RankingMatrix R = build_ranking(set, d, a);
      nlohmann::json r;
      for (std::size_t k : {1, 5, 10}) {
        r["R@" + std::to_string(k)] = recall_at_k(R, std::min(k, R.n));
      }
      out[retrieval_direction_name(d)][aggregation_name(a)] = r;
    }
  }
  return out;
}

/// Mean of the two directions' R@1 for one strategy.
inline double mean_r1(const nlohmann::json& retrieval, const std::string& strategy) {
  return 0.5 * (retrieval.at("v2a").at(strategy).at("R@1").get<double>() +
                retrieval.at("a2v").at(strategy).at("R@1").get<double>());
}

namespace detail {

inline Tensor classifier_features(const SequenceFeatures& f, ModalitySelect select) {
  return build_classifier_input(f.audio, f.visual, select);
}

inline Tensor rows_of_videos(const Tensor& x, const std::vector<std::size_t>& videos,
                             std::size_t steps) {
  std::vector<std::size_t> rows;
  for (std::size_t v : videos) {
    for (std::size_t t = 0; t < steps; ++t) rows.push_back(v * steps + t);
  }
  return ops::gather_rows(x, rows);
}

inline std::size_t argmax_row(const Tensor& logits, std::size_t r) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.cols(); ++c) {
    if (logits.at(r, c) > logits.at(r, best)) best = c;
  }
  return best;
}

}  // namespace detail

/// Frozen-encoder probing: a CLS + transformer classifier over per-timestep
/// features, trained on `train` and scored by top-1 accuracy on `eval`.
inline nlohmann::json evaluate_probe(const RunConfig& cfg, const ModelState& state,
                                     const std::vector<ClipView>& train,
                                     const std::vector<ClipView>& eval) {
  const TokenSource source = parse_token_source(cfg.probe_source);
  const ModalitySelect select = parse_modality_select(cfg.probe_modality);
  for (const auto* set : {&train, &eval}) {
    for (const auto& c : *set) {
      if (c.label >= cfg.num_classes) {
        throw InputError("probe: clip " + c.pair->id + " has label " + std::to_string(c.label) +
                         " outside num_classes " + std::to_string(cfg.num_classes));
      }
    }
  }
  const SequenceFeatures ftr = extract_features(state, train, source);
  const SequenceFeatures fev = extract_features(state, eval, source);
  const Tensor xtr = detail::classifier_features(ftr, select);
  const Tensor xev = detail::classifier_features(fev, select);

  ClassifierConfig hc;
  hc.input_dim = xtr.cols();
  hc.width = cfg.probe_width;
  hc.heads = 4;
  hc.depth = 2;
  hc.num_classes = cfg.num_classes;
  ClassifierHead head = ClassifierHead::init(hc, cfg.seed);
  AdamW opt(head.parameters(), {cfg.probe_lr, 0.0, 0.9, 0.999, 1e-8, 0.0});
  std::mt19937_64 rng(cfg.seed + 17);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double last_loss = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.probe_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t s = 0; s < order.size(); s += cfg.probe_batch) {
      const std::vector<std::size_t> ids(order.begin() + std::ptrdiff_t(s),
                                         order.begin() + std::ptrdiff_t(std::min(order.size(), s + cfg.probe_batch)));
      std::vector<double> onehot(ids.size() * cfg.num_classes, 0.0);
      for (std::size_t i = 0; i < ids.size(); ++i) onehot[i * cfg.num_classes + train[ids[i]].label] = 1.0;
      for (auto& p : head.parameters()) p.tensor.zero_grad();
      const Tensor logits = classify(detail::rows_of_videos(xtr, ids, ftr.steps), ftr.steps, head);
      const Tensor loss = ops::scale(
          ops::sum(ops::mul(ops::log_softmax_rows(logits, 1.0),
                            Tensor({ids.size(), cfg.num_classes}, std::move(onehot)))),
          -1.0 / double(ids.size()));
      loss.backward();
      opt.step(cfg.probe_lr);
      last_loss = loss.item();
    }
  }
  auto accuracy = [&](const Tensor& x, const SequenceFeatures& f, const std::vector<ClipView>& clips) {
    NoGradGuard no_grad;
    const Tensor logits = classify(x, f.steps, head);
    std::size_t hits = 0;
    for (std::size_t v = 0; v < clips.size(); ++v) hits += detail::argmax_row(logits, v) == clips[v].label;
    return double(hits) / double(clips.size());
  };
  return {{"task", "probe"},
          {"source", cfg.probe_source},
          {"modality", cfg.probe_modality},
          {"epochs", cfg.probe_epochs},
          {"train_videos", train.size()},
          {"eval_videos", eval.size()},
          {"train_accuracy", accuracy(xtr, ftr, train)},
          {"accuracy", accuracy(xev, fev, eval)},
          {"chance", 1.0 / double(cfg.num_classes)},
          {"final_train_loss", last_loss}};
}

/// Writes an 8-bit binary PGM of a map whose values lie in [lo, hi].
inline void write_pgm(const std::filesystem::path& path, const Map2D& map, double lo, double hi) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot open " + path.string() + " for writing");
  out << "P5\n" << map.cols << ' ' << map.rows << "\n255\n";
  for (double v : map.values) {
    const double u = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(u * 255.0))));
  }
}

/// Sound-prompted localisation on synthetic clips: for each image, one map
/// per audio class prompt, scored against the object mask when the class
/// is present in the image.
inline nlohmann::json evaluate_localization(const RunConfig& cfg, const ModelState& state,
                                            const SyntheticDataset& data,
                                            const std::filesystem::path& dump_dir = {}) {
  if (!dump_dir.empty()) std::filesystem::create_directories(dump_dir);
  const std::size_t C = data.config.num_classes, F = state.config.frame_size;
  std::vector<std::vector<double>> ap(C), iou(C);
  std::vector<FloatArray> prompts;
  for (std::size_t c = 0; c < C; ++c) prompts.push_back(data.templates.audio_prompt(c, state.config.audio_window));
  NoGradGuard no_grad;
  std::mt19937_64 unused(0);
  double lo = 1.0, hi = -1.0;
  std::size_t maps = 0;
  const std::size_t images = std::min(cfg.localize_images, data.videos.size());
  for (std::size_t v = 0; v < images; ++v) {
    const SyntheticVideo& video = data.videos[v];
    const std::size_t t = video.pair.num_frames() / 2;
    const std::vector<FloatArray> frames(C, video.pair.frames[t]);
    const TokenBatch a = tokenize(prompts, state.config.patch, 0.0, Modality::kAudio, state.embed_audio, unused);
    const TokenBatch vis = tokenize(frames, state.config.patch, 0.0, Modality::kVisual, state.embed_visual, unused);
    const EncodedPair enc = encode(a, vis, state);
    for (std::size_t c = 0; c < C; ++c) {
      const LocalizationMap m = localization_map(enc, c, F);
      ++maps;
      for (double x : m.full.values) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
      std::vector<std::uint8_t> gt(F * F, 0);
      if (video.frame_classes[t] == c) gt = video.object_mask(t, F);
      const auto s = cfg.iou_threshold >= 0.0 ? segmentation_scores(m.full, gt, cfg.iou_threshold)
                                             : segmentation_scores(m.full, gt);
      if (s) {
        ap[c].push_back(s->ap);
        iou[c].push_back(s->iou);
      }
      if (!dump_dir.empty()) {
        const std::string stem = "loc_v" + std::to_string(v) + "_c" + std::to_string(c);
        write_cavt(dump_dir / (stem + ".cavt"),
                   FloatArray{{F, F}, std::vector<float>(m.full.values.begin(), m.full.values.end())});
        write_pgm(dump_dir / (stem + ".pgm"), m.full, -1.0, 1.0);
      }
    }
  }
  nlohmann::json per_class = nlohmann::json::array();
  double map_sum = 0.0, miou_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < C; ++c) {
    if (ap[c].empty()) continue;
    const double a = std::accumulate(ap[c].begin(), ap[c].end(), 0.0) / double(ap[c].size());
    const double i = std::accumulate(iou[c].begin(), iou[c].end(), 0.0) / double(iou[c].size());
    per_class.push_back({{"class", c}, {"images", ap[c].size()}, {"ap", a}, {"iou", i}});
    map_sum += a;
    miou_sum += i;
    ++present;
  }
  return {{"task", "localize"},
          {"images", images},
          {"maps", maps},
          {"map_size", F},
          {"map_min", lo},
          {"map_max", hi},
          {"iou_rule", cfg.iou_threshold >= 0.0 ? "fixed" : "per_image_mean"},
          {"mAP", present ? map_sum / double(present) : 0.0},
          {"mIoU", present ? miou_sum / double(present) : 0.0},
          {"per_class", per_class}};
}

/// Boundary recall (within one frame) of intra-clip temporal segmentation
/// over per-timestep contrastive features.
inline nlohmann::json evaluate_temporal_segmentation(const RunConfig& cfg, const ModelState& state,
                                                     const std::vector<ClipView>& clips) {
  const ModalitySelect select = parse_modality_select(cfg.segment_modality);
  const SequenceFeatures f = extract_features(state, clips);
  const Tensor x = build_classifier_input(f.audio, f.visual, select);
  const std::size_t k = cfg.effective_segment_k(), dim = x.cols();
  double recall = 0.0;
  std::size_t scored = 0, exact = 0, fallbacks = 0;
  for (std::size_t v = 0; v < clips.size(); ++v) {
    if (clips[v].frame_labels.empty()) continue;
    FeatureRows rows(f.steps, std::vector<double>(dim));
    for (std::size_t t = 0; t < f.steps; ++t) {
      std::copy_n(x.data().begin() + (v * f.steps + t) * dim, dim, rows[t].begin());
    }
    const TemporalSegmentation seg = temporal_segment(rows, k);
    const auto truth = segment_boundaries(clips[v].frame_labels);
    const auto pred = segment_boundaries(seg.labels);
    recall += boundary_recall(truth, pred, 1);
    exact += (truth == pred) ? 1 : 0;
    fallbacks += seg.used_fallback ? 1 : 0;
    ++scored;
  }
  if (scored == 0) throw InputError("segment: no clip carries per-frame labels");
  return {{"task", "segment"},
          {"videos", scored},
          {"k", k},
          {"modality", cfg.segment_modality},
          {"boundary_recall", recall / double(scored)},
          {"exact_rate", double(exact) / double(scored)},
          {"kmeans_fallbacks", fallbacks}};
}

}  // namespace cavsync

#endif  // CAVSYNC_HARNESS_EVALUATE_HPP_
