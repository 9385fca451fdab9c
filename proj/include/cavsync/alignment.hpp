// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_ALIGNMENT_HPP_
#define CAVSYNC_ALIGNMENT_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "cavsync/errors.hpp"
#include "cavsync/numerics/cavt.hpp"

namespace cavsync {

/// Half-open spectrogram column range [start, end).
struct Window {
  std::int64_t start = 0;
  std::int64_t end = 0;
  bool operator==(const Window&) const = default;
};

/// Column the frame is mapped to before any clamping: floor(i * S / T).
inline std::int64_t window_center(std::size_t i, std::size_t frames, std::size_t columns) {
  return static_cast<std::int64_t>((i * columns) / frames);
}

/// Unclamped window of `width` columns centred on frame i.
inline Window raw_window(std::size_t i, std::size_t frames, std::size_t columns,
                         std::size_t width) {
  const std::int64_t start =
      window_center(i, frames, columns) - static_cast<std::int64_t>(width / 2);
  return {start, start + static_cast<std::int64_t>(width)};
}

/// Spectrogram window for frame i of `frames` over a `columns`-wide
/// spectrogram. The start is clamped into [0, columns - width] so the window
/// always keeps its full width.
inline Window align_window(std::size_t i, std::size_t frames, std::size_t columns,
                           std::size_t width) {
  if (frames == 0) throw ParameterError("align_window: frame count must be positive");
  if (i >= frames) {
    throw ParameterError("align_window: frame index " + std::to_string(i) + " out of " +
                         std::to_string(frames));
  }
  if (width == 0) throw ConfigError("align_window: window width must be positive");
  if (width > columns) {
    throw ConfigError("audio segment longer than clip (" + std::to_string(width) + " > " +
                      std::to_string(columns) + " columns)");
  }
  const Window raw = raw_window(i, frames, columns, width);
  const std::int64_t hi = static_cast<std::int64_t>(columns - width);
  const std::int64_t start = std::clamp<std::int64_t>(raw.start, 0, hi);
  return {start, start + static_cast<std::int64_t>(width)};
}

/// One clip: T frames (C x H x W) and the full spectrogram (mel x S), with
/// the per-frame windows precomputed.
struct AlignedPair {
  std::string id;
  std::vector<FloatArray> frames;
  FloatArray spectrogram;
  std::vector<Window> windows;
  std::size_t window_length = 0;

  std::size_t num_frames() const { return frames.size(); }
  std::size_t mel_bins() const { return spectrogram.shape.at(0); }
  std::size_t columns() const { return spectrogram.shape.at(1); }
};

/// Validates the pieces of a clip and computes its alignment windows.
inline AlignedPair make_aligned_pair(std::string id, std::vector<FloatArray> frames,
                                     FloatArray spectrogram, std::size_t window_length,
                                     std::size_t patch) {
  if (frames.empty()) throw InputError(id + ": clip has no frames");
  if (spectrogram.shape.size() != 2) {
    throw ShapeError(id + ": spectrogram must be mel x columns, got " +
                     shape_str(spectrogram.shape));
  }
  if (patch == 0 || window_length % patch != 0) {
    throw ConfigError(id + ": window length " + std::to_string(window_length) +
                      " is not a multiple of patch size " + std::to_string(patch));
  }
  const Shape& frame_shape = frames.front().shape;
  for (const auto& f : frames) {
    if (f.shape.size() != 3 || f.shape != frame_shape) {
      throw ShapeError(id + ": frames must share one C x H x W shape, got " +
                       shape_str(f.shape));
    }
  }
  const std::size_t columns = spectrogram.shape[1];
  if (window_length > columns) {
    throw ConfigError(id + ": audio segment longer than clip (" + std::to_string(window_length) +
                      " > " + std::to_string(columns) + " columns)");
  }
  AlignedPair pair{std::move(id), std::move(frames), std::move(spectrogram), {}, window_length};
  for (std::size_t t = 0; t < pair.frames.size(); ++t) {
    pair.windows.push_back(align_window(t, pair.frames.size(), columns, window_length));
  }
  return pair;
}

/// spectrogram[:, start:end] for frame t.
inline FloatArray window_of(const AlignedPair& pair, std::size_t t) {
  const Window w = pair.windows.at(t);
  const std::size_t mel = pair.mel_bins(), cols = pair.columns();
  const std::size_t width = static_cast<std::size_t>(w.end - w.start);
  FloatArray out{{mel, width}, std::vector<float>(mel * width)};
  for (std::size_t m = 0; m < mel; ++m) {
    std::copy_n(pair.spectrogram.data.begin() + m * cols + w.start, width,
                out.data.begin() + m * width);
  }
  return out;
}

struct FrameWindowSample {
  FloatArray frame;
  FloatArray window;
  std::size_t index = 0;
};

/// Draws one frame uniformly at random together with its aligned window.
template <class Rng>
FrameWindowSample sample_training_pair(const AlignedPair& pair, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pair.num_frames() - 1);
  const std::size_t t = pair.num_frames() == 1 ? 0 : pick(rng);
  return {pair.frames[t], window_of(pair, t), t};
}

/// Every frame with its aligned window, in temporal order.
inline std::vector<FrameWindowSample> sample_all_pairs(const AlignedPair& pair) {
  std::vector<FrameWindowSample> out;
  out.reserve(pair.num_frames());
  for (std::size_t t = 0; t < pair.num_frames(); ++t) {
    out.push_back({pair.frames[t], window_of(pair, t), t});
  }
  return out;
}

}  // namespace cavsync

#endif  // CAVSYNC_ALIGNMENT_HPP_
