// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_HARNESS_CONFIG_HPP_
#define CAVSYNC_HARNESS_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "cavsync/downstream/probe.hpp"
#include "cavsync/downstream/retrieval.hpp"
#include "cavsync/errors.hpp"
#include "cavsync/harness/synthetic.hpp"
#include "cavsync/model/classifier.hpp"
#include "cavsync/model/state.hpp"
#include "cavsync/objectives.hpp"
#include "cavsync/train.hpp"

namespace cavsync {

inline ReconNormalization parse_recon_norm(const std::string& s) {
  if (s == "element") return ReconNormalization::kPerElement;
  if (s == "patch") return ReconNormalization::kPerPatch;
  throw ConfigError("unknown recon_norm '" + s + "' (element|patch)");
}

inline ModalitySelect parse_modality_select(const std::string& s) {
  if (s == "audio") return ModalitySelect::kAudio;
  if (s == "visual") return ModalitySelect::kVisual;
  if (s == "both") return ModalitySelect::kBoth;
  throw ConfigError("unknown probe_modality '" + s + "' (audio|visual|both)");
}

/// Everything a CLI run needs. Every field has a default and a flat JSON
/// key of the same name.
struct RunConfig {
  ModelConfig model = ModelConfig::toy();

  double mask_ratio_audio = 0.75;
  double mask_ratio_visual = 0.75;
  double temperature = 0.05;
  double lambda_c = 0.1;
  double lambda_r = 1.0;
  std::string contrastive_direction = "symmetric";
  std::string recon_norm = "element";

  double learning_rate = 1e-3;
  double weight_decay = 5e-7;
  double beta1 = 0.95;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double warmup_fraction = 0.1;
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;

  std::size_t num_videos = 256;
  std::size_t eval_videos = 64;
  std::size_t frames = 16;
  std::size_t columns = 256;
  std::size_t num_classes = 8;
  double correlation = 1.0;
  std::size_t events_per_video = 2;
  double noise_std = 0.1;
  std::uint64_t template_seed = 1234;
  double object_size = 0.5;
  double clutter = 1.0;
  std::int64_t data_seed = -1;
  std::string train_manifest;
  std::string eval_manifest;

  std::string aggregation = "diag_mean";
  std::string probe_source = "global";
  std::string probe_modality = "both";
  std::size_t probe_epochs = 30;
  double probe_lr = 1e-3;
  std::size_t probe_width = 32;
  std::size_t probe_batch = 16;
  std::size_t segment_k = 0;
  std::string segment_modality = "visual";
  double iou_threshold = -1.0;
  std::size_t localize_images = 32;

  /// Calls v(name, field) for every configurable field.
  template <class V>
  void visit(V&& v) {
    v("dim", model.dim);
    v("heads", model.heads);
    v("encoder_depth", model.encoder_depth);
    v("mlp_ratio", model.mlp_ratio);
    v("decoder_dim", model.decoder_dim);
    v("decoder_depth", model.decoder_depth);
    v("decoder_heads", model.decoder_heads);
    v("num_registers", model.num_registers);
    v("use_global_token", model.use_global_token);
    v("patch", model.patch);
    v("mel_bins", model.mel_bins);
    v("audio_window", model.audio_window);
    v("frame_channels", model.frame_channels);
    v("frame_size", model.frame_size);
    v("ln_eps", model.ln_eps);
    v("init_std", model.init_std);
    v("mask_ratio_audio", mask_ratio_audio);
    v("mask_ratio_visual", mask_ratio_visual);
    v("temperature", temperature);
    v("lambda_c", lambda_c);
    v("lambda_r", lambda_r);
    v("contrastive_direction", contrastive_direction);
    v("recon_norm", recon_norm);
    v("learning_rate", learning_rate);
    v("weight_decay", weight_decay);
    v("beta1", beta1);
    v("beta2", beta2);
    v("adam_eps", adam_eps);
    v("warmup_fraction", warmup_fraction);
    v("batch_size", batch_size);
    v("epochs", epochs);
    v("seed", seed);
    v("num_videos", num_videos);
    v("eval_videos", eval_videos);
    v("frames", frames);
    v("columns", columns);
    v("num_classes", num_classes);
    v("correlation", correlation);
    v("events_per_video", events_per_video);
    v("noise_std", noise_std);
    v("template_seed", template_seed);
    v("object_size", object_size);
    v("clutter", clutter);
    v("data_seed", data_seed);
    v("train_manifest", train_manifest);
    v("eval_manifest", eval_manifest);
    v("aggregation", aggregation);
    v("probe_source", probe_source);
    v("probe_modality", probe_modality);
    v("probe_epochs", probe_epochs);
    v("probe_lr", probe_lr);
    v("probe_width", probe_width);
    v("probe_batch", probe_batch);
    v("segment_k", segment_k);
    v("segment_modality", segment_modality);
    v("iou_threshold", iou_threshold);
    v("localize_images", localize_images);
  }
  template <class V>
  void visit(V&& v) const {
    const_cast<RunConfig*>(this)->visit(std::forward<V>(v));
  }

  ObjectiveConfig objective() const {
    ObjectiveConfig o;
    o.mask_ratio_audio = mask_ratio_audio;
    o.mask_ratio_visual = mask_ratio_visual;
    o.temperature = temperature;
    o.weights = {lambda_c, lambda_r};
    o.direction = parse_direction(contrastive_direction);
    o.recon_norm = parse_recon_norm(recon_norm);
    return o;
  }

  OptimizerConfig optimizer() const {
    return {learning_rate, weight_decay, beta1, beta2, adam_eps, warmup_fraction};
  }

  std::uint64_t train_data_seed() const {
    return data_seed < 0 ? seed : std::uint64_t(data_seed);
  }
  std::uint64_t eval_data_seed() const { return train_data_seed() + 1000003; }

  /// Synthetic data matching the model's input geometry.
  SyntheticConfig synthetic(bool eval_split) const {
    SyntheticConfig s;
    s.num_videos = eval_split ? eval_videos : num_videos;
    s.frames = frames;
    s.columns = columns;
    s.window_length = model.audio_window;
    s.num_classes = num_classes;
    s.correlation = correlation;
    s.events_per_video = events_per_video;
    s.noise_std = noise_std;
    s.seed = eval_split ? eval_data_seed() : train_data_seed();
    s.template_seed = template_seed;
    s.mel_bins = model.mel_bins;
    s.frame_size = model.frame_size;
    s.channels = model.frame_channels;
    s.object_size = object_size;
    s.clutter = clutter;
    s.patch = model.patch;
    return s;
  }

  std::size_t effective_segment_k() const { return segment_k == 0 ? events_per_video : segment_k; }

  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError("run config: " + what);
    };
    model.validate();
    need(mask_ratio_audio >= 0.0 && mask_ratio_audio < 1.0, "mask_ratio_audio must lie in [0, 1)");
    need(mask_ratio_visual >= 0.0 && mask_ratio_visual < 1.0,
         "mask_ratio_visual must lie in [0, 1)");
    need(temperature > 0.0, "temperature must be > 0");
    need(lambda_c >= 0.0 && lambda_r >= 0.0, "loss weights must be >= 0");
    objective();
    need(learning_rate >= 0.0, "learning_rate must be >= 0");
    need(weight_decay >= 0.0, "weight_decay must be >= 0");
    need(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must lie in [0, 1)");
    need(adam_eps > 0.0, "adam_eps must be > 0");
    need(warmup_fraction >= 0.0 && warmup_fraction <= 1.0, "warmup_fraction must lie in [0, 1]");
    need(batch_size >= 2, "batch_size must be >= 2");
    need(epochs >= 1, "epochs must be >= 1");
    need(train_manifest.empty() ? num_videos >= batch_size : true,
         "num_videos must be >= batch_size");
    need(eval_videos >= 2, "eval_videos must be >= 2");
    synthetic(false).validate();
    parse_aggregation(aggregation);
    parse_token_source(probe_source);
    parse_modality_select(probe_modality);
    need(probe_width > 0 && probe_width % 4 == 0, "probe_width must be a positive multiple of 4");
    need(probe_batch >= 1, "probe_batch must be >= 1");
    need(probe_lr >= 0.0, "probe_lr must be >= 0");
    need(effective_segment_k() >= 1 && effective_segment_k() <= frames,
         "segment_k must lie in [1, frames]");
    parse_modality_select(segment_modality);
    need(localize_images >= 1, "localize_images must be >= 1");
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    visit([&](const char* name, const auto& field) { j[name] = field; });
    return j;
  }

  /// Overlays the keys of `j` onto this config. Unknown keys and values of
  /// the wrong type are configuration errors.
  void apply_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    std::set<std::string> known;
    visit([&](const char* name, auto& field) {
      known.insert(name);
      if (!j.contains(name)) return;
      const auto& value = j.at(name);
      using T = std::decay_t<decltype(field)>;
      bool ok = false;
      if constexpr (std::is_same_v<T, bool>) {
        ok = value.is_boolean();
      } else if constexpr (std::is_same_v<T, std::string>) {
        ok = value.is_string();
      } else if constexpr (std::is_floating_point_v<T>) {
        ok = value.is_number();
      } else if constexpr (std::is_unsigned_v<T>) {
        ok = value.is_number_unsigned() ||
             (value.is_number_integer() && value.template get<std::int64_t>() >= 0);
      } else {
        ok = value.is_number_integer();
      }
      if (!ok) throw ConfigError(std::string("config field '") + name + "' has the wrong type");
      field = value.template get<T>();
    });
    for (const auto& [key, _] : j.items()) {
      if (!known.count(key)) throw ConfigError("unknown config field '" + key + "'");
    }
  }

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    c.apply_json(j);
    return c;
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config file " + path.string() + ": " + e.what());
    }
    return from_json(j);
  }
};

}  // namespace cavsync

#endif  // CAVSYNC_HARNESS_CONFIG_HPP_
