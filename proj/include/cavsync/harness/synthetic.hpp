// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_HARNESS_SYNTHETIC_HPP_
#define CAVSYNC_HARNESS_SYNTHETIC_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "cavsync/alignment.hpp"
#include "cavsync/errors.hpp"
#include "cavsync/numerics/cavt.hpp"

namespace cavsync {

/// Paired audio-visual clips built from latent event sequences.
///
/// Each clip is cut into `events_per_video` contiguous events, each with a
/// latent class. Frames draw the class's image template as an object on a
/// blank background; spectrogram columns draw the class's spectral template
/// at weight rho, mixed with an independent distractor event sequence at
/// weight 1 - rho. Behind the object, each clip has a static background
/// texture of amplitude `clutter` that no audio depends on. Gaussian noise
/// is added to both modalities.
struct SyntheticConfig {
  std::size_t num_videos = 256;
  std::size_t frames = 16;
  std::size_t columns = 256;
  std::size_t window_length = 64;
  std::size_t num_classes = 8;
  double correlation = 1.0;
  std::size_t events_per_video = 2;
  double noise_std = 0.1;
  std::uint64_t seed = 0;
  std::uint64_t template_seed = 1234;
  std::size_t mel_bins = 64;
  std::size_t frame_size = 64;
  std::size_t channels = 3;
  double object_size = 0.5;
  double clutter = 1.0;
  std::size_t patch = 16;

  std::size_t object_pixels() const {
    return std::max<std::size_t>(1, std::size_t(std::lround(object_size * double(frame_size))));
  }

  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError("synthetic config: " + what);
    };
    need(frames >= 1, "frames must be >= 1");
    need(num_classes >= 2, "num_classes must be >= 2");
    need(events_per_video >= 1 && events_per_video <= frames,
         "events_per_video must lie in [1, frames]");
    need(correlation >= 0.0 && correlation <= 1.0, "correlation must lie in [0, 1]");
    need(noise_std >= 0.0, "noise_std must be >= 0");
    need(clutter >= 0.0, "clutter must be >= 0");
    need(object_size > 0.0 && object_size <= 1.0, "object_size must lie in (0, 1]");
    need(mel_bins >= 1 && frame_size >= 1 && channels >= 1, "sizes must be positive");
    need(window_length >= 1 && window_length <= columns,
         "audio segment longer than clip (window_length > columns)");
  }
};

/// Class-indexed image and spectral templates, fixed by the template seed.
struct SyntheticTemplates {
  std::size_t object = 0;
  std::size_t channels = 0;
  std::size_t mel_bins = 0;
  std::vector<std::vector<float>> image;     // per class, C x object x object
  std::vector<std::vector<double>> spectrum;  // per class, mel profile
  std::vector<double> rate, phase;            // per class temporal modulation

  static SyntheticTemplates make(const SyntheticConfig& cfg) {
    std::mt19937_64 rng(cfg.template_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    SyntheticTemplates t;
    t.object = cfg.object_pixels();
    t.channels = cfg.channels;
    t.mel_bins = cfg.mel_bins;
    const double O = double(t.object);
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
      std::vector<double> colour(cfg.channels);
      for (auto& v : colour) v = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + 0.5 * unit(rng));
      const double fy = std::floor(unit(rng) * 3.0), fx = std::floor(unit(rng) * 3.0);
      const double phi = 2.0 * std::numbers::pi * unit(rng);
      std::vector<float> img(cfg.channels * t.object * t.object);
      for (std::size_t ch = 0; ch < cfg.channels; ++ch) {
        for (std::size_t y = 0; y < t.object; ++y) {
          for (std::size_t x = 0; x < t.object; ++x) {
            const double wave =
                std::cos(2.0 * std::numbers::pi * (fy * double(y) + fx * double(x)) / O + phi);
            img[(ch * t.object + y) * t.object + x] = float(colour[ch] * (0.6 + 0.4 * wave));
          }
        }
      }
      t.image.push_back(std::move(img));

      std::vector<double> spec(cfg.mel_bins, 0.0);
      const double width = std::max(1.0, double(cfg.mel_bins) / 16.0);
      for (int bump = 0; bump < 2; ++bump) {
        const double mu = unit(rng) * double(cfg.mel_bins);
        for (std::size_t m = 0; m < cfg.mel_bins; ++m) {
          const double z = (double(m) - mu) / width;
          spec[m] += std::exp(-0.5 * z * z);
        }
      }
      t.spectrum.push_back(std::move(spec));
      t.rate.push_back(std::floor(unit(rng) * 4.0));
      t.phase.push_back(2.0 * std::numbers::pi * unit(rng));
    }
    return t;
  }

  /// Spectral template value of class c at mel bin m and column j.
  double audio_value(std::size_t c, std::size_t m, std::size_t j) const {
    const double mod =
        0.75 + 0.25 * std::cos(2.0 * std::numbers::pi * rate[c] * double(j) / 64.0 + phase[c]);
    return spectrum[c][m] * mod;
  }

  /// Noise-free mel x width window rendering class c alone.
  FloatArray audio_prompt(std::size_t c, std::size_t width) const {
    FloatArray out{{mel_bins, width}, std::vector<float>(mel_bins * width)};
    for (std::size_t m = 0; m < mel_bins; ++m) {
      for (std::size_t j = 0; j < width; ++j) out.data[m * width + j] = float(audio_value(c, m, j));
    }
    return out;
  }
};

struct ObjectBox {
  std::size_t y = 0;
  std::size_t x = 0;
  std::size_t size = 0;
};

struct SyntheticVideo {
  AlignedPair pair;
  std::vector<std::size_t> frame_classes;  // per timestep, visual event class
  std::vector<std::size_t> audio_classes;  // per timestep, dominant audio class
  std::vector<std::size_t> boundaries;     // event start frames, excluding 0
  std::vector<ObjectBox> boxes;            // per timestep
  std::vector<std::size_t> labels;         // sorted distinct visual classes
  std::size_t label = 0;                   // class covering the most frames

  /// Binary object mask of frame t at frame resolution.
  std::vector<std::uint8_t> object_mask(std::size_t t, std::size_t frame_size) const {
    std::vector<std::uint8_t> mask(frame_size * frame_size, 0);
    const ObjectBox& b = boxes.at(t);
    for (std::size_t y = b.y; y < b.y + b.size; ++y) {
      for (std::size_t x = b.x; x < b.x + b.size; ++x) mask[y * frame_size + x] = 1;
    }
    return mask;
  }
};

struct SyntheticDataset {
  SyntheticConfig config;
  SyntheticTemplates templates;
  std::vector<SyntheticVideo> videos;
};

namespace detail {

struct EventTrack {
  std::vector<std::size_t> starts;   // event start frames, first is 0
  std::vector<std::size_t> classes;  // per event
  std::vector<std::size_t> per_frame;
};

template <class Rng>
EventTrack draw_events(std::size_t frames, std::size_t events, std::size_t classes, Rng& rng) {
  EventTrack e;
  std::vector<std::size_t> cuts(frames - 1);
  for (std::size_t i = 0; i < cuts.size(); ++i) cuts[i] = i + 1;
  for (std::size_t i = 0; i + 1 < events; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, cuts.size() - 1);
    std::swap(cuts[i], cuts[pick(rng)]);
  }
  e.starts.push_back(0);
  e.starts.insert(e.starts.end(), cuts.begin(), cuts.begin() + std::ptrdiff_t(events - 1));
  std::sort(e.starts.begin(), e.starts.end());
  std::uniform_int_distribution<std::size_t> first(0, classes - 1), other(0, classes - 2);
  for (std::size_t i = 0; i < events; ++i) {
    if (i == 0) {
      e.classes.push_back(first(rng));
    } else {
      std::size_t c = other(rng);
      if (c >= e.classes.back()) ++c;
      e.classes.push_back(c);
    }
  }
  e.per_frame.resize(frames);
  for (std::size_t i = 0; i < events; ++i) {
    const std::size_t end = i + 1 < events ? e.starts[i + 1] : frames;
    for (std::size_t t = e.starts[i]; t < end; ++t) e.per_frame[t] = e.classes[i];
  }
  return e;
}

}  // namespace detail

inline SyntheticDataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  SyntheticDataset ds;
  ds.config = cfg;
  ds.templates = SyntheticTemplates::make(cfg);
  const SyntheticTemplates& tpl = ds.templates;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t T = cfg.frames, F = cfg.frame_size, O = tpl.object, S = cfg.columns;
  const std::size_t M = cfg.mel_bins, C = cfg.channels;
  std::uniform_int_distribution<std::size_t> place(0, F - O);
  const double rho = cfg.correlation;

  for (std::size_t v = 0; v < cfg.num_videos; ++v) {
    const detail::EventTrack ev = detail::draw_events(T, cfg.events_per_video, cfg.num_classes, rng);
    const detail::EventTrack dis =
        detail::draw_events(T, cfg.events_per_video, cfg.num_classes, rng);
    std::vector<ObjectBox> event_box;
    for (std::size_t i = 0; i < ev.classes.size(); ++i) {
      const std::size_t y = place(rng);
      event_box.push_back({y, place(rng), O});
    }

    std::vector<float> background(C * F * F, 0.0f);
    if (cfg.clutter > 0.0) {
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int wave = 0; wave < 3; ++wave) {
        const double fy = std::floor(unit(rng) * 4.0), fx = std::floor(unit(rng) * 4.0);
        const double phi = 2.0 * std::numbers::pi * unit(rng);
        std::vector<double> colour(C);
        for (auto& v : colour) v = 2.0 * unit(rng) - 1.0;
        for (std::size_t ch = 0; ch < C; ++ch) {
          for (std::size_t y = 0; y < F; ++y) {
            for (std::size_t x = 0; x < F; ++x) {
              const double arg =
                  2.0 * std::numbers::pi * (fy * double(y) + fx * double(x)) / double(F) + phi;
              background[(ch * F + y) * F + x] +=
                  float(cfg.clutter * colour[ch] * std::cos(arg) / 3.0);
            }
          }
        }
      }
    }

    SyntheticVideo video;
    std::vector<FloatArray> frames;
    for (std::size_t t = 0; t < T; ++t) {
      std::size_t event = 0;
      while (event + 1 < ev.starts.size() && ev.starts[event + 1] <= t) ++event;
      const ObjectBox box = event_box[event];
      const std::vector<float>& img = tpl.image[ev.classes[event]];
      FloatArray frame{{C, F, F}, background};
      for (std::size_t ch = 0; ch < C; ++ch) {
        for (std::size_t y = 0; y < O; ++y) {
          for (std::size_t x = 0; x < O; ++x) {
            frame.data[(ch * F + box.y + y) * F + box.x + x] = img[(ch * O + y) * O + x];
          }
        }
      }
      if (cfg.noise_std > 0.0) {
        for (float& p : frame.data) p = float(double(p) + cfg.noise_std * noise(rng));
      }
      frames.push_back(std::move(frame));
      video.boxes.push_back(box);
      video.frame_classes.push_back(ev.per_frame[t]);
      video.audio_classes.push_back(rho >= 0.5 ? ev.per_frame[t] : dis.per_frame[t]);
    }

    FloatArray spec{{M, S}, std::vector<float>(M * S)};
    for (std::size_t j = 0; j < S; ++j) {
      const std::size_t t = std::min(T - 1, j * T / S);
      const std::size_t ce = ev.per_frame[t], cd = dis.per_frame[t];
      for (std::size_t m = 0; m < M; ++m) {
        double value = rho * tpl.audio_value(ce, m, j) + (1.0 - rho) * tpl.audio_value(cd, m, j);
        if (cfg.noise_std > 0.0) value += cfg.noise_std * noise(rng);
        spec.data[m * S + j] = float(value);
      }
    }

    video.boundaries.assign(ev.starts.begin() + 1, ev.starts.end());
    video.labels = ev.classes;
    std::sort(video.labels.begin(), video.labels.end());
    video.labels.erase(std::unique(video.labels.begin(), video.labels.end()), video.labels.end());
    std::vector<std::size_t> count(cfg.num_classes, 0);
    for (std::size_t c : ev.per_frame) ++count[c];
    std::size_t best = ev.per_frame[0];
    for (std::size_t c : ev.per_frame) {
      if (count[c] > count[best]) best = c;
    }
    video.label = best;
    video.pair = make_aligned_pair("syn" + std::to_string(cfg.seed) + "_" + std::to_string(v),
                                   std::move(frames), std::move(spec), cfg.window_length,
                                   cfg.patch);
    ds.videos.push_back(std::move(video));
  }
  return ds;
}

}  // namespace cavsync

#endif  // CAVSYNC_HARNESS_SYNTHETIC_HPP_
