// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_TOKENIZER_HPP_
#define CAVSYNC_TOKENIZER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "cavsync/errors.hpp"
#include "cavsync/model/layers.hpp"
#include "cavsync/numerics/cavt.hpp"
#include "cavsync/numerics/ops.hpp"

namespace cavsync {

enum class Modality { kAudio, kVisual };

inline const char* modality_name(Modality m) { return m == Modality::kAudio ? "audio" : "visual"; }

struct PatchGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  bool operator==(const PatchGrid&) const = default;
};

/// Grid of non-overlapping p x p patches over an H x W plane.
inline PatchGrid patch_grid(std::size_t height, std::size_t width, std::size_t patch) {
  if (patch == 0 || height % patch != 0 || width % patch != 0) {
    throw ShapeError("patchify: " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by patch size " + std::to_string(patch));
  }
  return {height / patch, width / patch};
}

/// Splits a (C x) H x W array into raster-ordered flattened patches.
///
/// Rank-2 inputs are treated as single-channel. Each patch row is laid out
/// channel-major: [c][dy][dx], length p * p * C.
inline Tensor patchify(const FloatArray& x, std::size_t patch) {
  if (x.shape.size() != 2 && x.shape.size() != 3) {
    throw ShapeError("patchify: expected H x W or C x H x W, got " + shape_str(x.shape));
  }
  const bool planar = x.shape.size() == 2;
  const std::size_t channels = planar ? 1 : x.shape[0];
  const std::size_t height = planar ? x.shape[0] : x.shape[1];
  const std::size_t width = planar ? x.shape[1] : x.shape[2];
  const PatchGrid grid = patch_grid(height, width, patch);
  const std::size_t patch_len = patch * patch * channels;
  std::vector<double> out(grid.size() * patch_len);
  for (std::size_t gr = 0; gr < grid.rows; ++gr) {
    for (std::size_t gc = 0; gc < grid.cols; ++gc) {
      double* dst = out.data() + (gr * grid.cols + gc) * patch_len;
      for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t dy = 0; dy < patch; ++dy) {
          const float* src =
              x.data.data() + (c * height + gr * patch + dy) * width + gc * patch;
          for (std::size_t dx = 0; dx < patch; ++dx) *dst++ = double(src[dx]);
        }
      }
    }
  }
  return Tensor({grid.size(), patch_len}, std::move(out));
}

struct MaskSplit {
  std::vector<std::size_t> kept;    // ascending
  std::vector<std::size_t> masked;  // ascending
};

/// Number of masked patches: round(ratio * n), halves rounded away from zero.
inline std::size_t masked_count(std::size_t n, double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw ParameterError("mask ratio must lie in [0, 1), got " + std::to_string(ratio));
  }
  return static_cast<std::size_t>(std::lround(ratio * double(n)));
}

/// Unstructured random masking: a uniformly random subset of round(ratio * n)
/// positions is hidden.
template <class Rng>
MaskSplit mask_random(std::size_t n, double ratio, Rng& rng) {
  const std::size_t n_masked = masked_count(n, ratio);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Partial Fisher-Yates: the first n_masked slots end up a uniform sample.
  for (std::size_t i = 0; i < n_masked; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  MaskSplit split;
  split.masked.assign(order.begin(), order.begin() + n_masked);
  split.kept.assign(order.begin() + n_masked, order.end());
  std::sort(split.masked.begin(), split.masked.end());
  std::sort(split.kept.begin(), split.kept.end());
  return split;
}

/// Projection, position table and modality code for one modality.
struct PatchEmbedding {
  Linear projection;  // [p*p*C, dim]
  Tensor modality;    // [dim], learned
  Tensor position;    // [grid cells, dim], fixed sin-cos
  PatchGrid grid;

  static PatchEmbedding init(std::size_t patch_len, std::size_t dim, PatchGrid grid,
                             double init_std, InitRng& rng) {
    PatchEmbedding e;
    e.projection = Linear::init(patch_len, dim, rng);
    e.modality = normal_param({dim}, init_std, rng);
    e.position = sincos_2d(dim, grid.rows, grid.cols);
    e.grid = grid;
    return e;
  }
  void collect(ParamList& out, const std::string& name) const {
    projection.collect(out, name + ".proj", name);
    out.push_back({name + ".modality", name, modality});
  }
};

/// Patch tokens of one modality for a batch of samples that share a mask
/// ratio (so every sample keeps the same number of patches).
struct TokenBatch {
  Modality modality = Modality::kAudio;
  PatchGrid grid;
  std::size_t batch = 0;
  Tensor tokens;                         // [batch * kept, dim]
  std::vector<MaskSplit> masks;          // per sample
  Tensor original_patches;               // [batch * masked, p*p*C]; undefined when nothing masked
  std::size_t patch_len = 0;

  std::size_t num_patches() const { return grid.size(); }
  std::size_t kept_per_sample() const { return masks.empty() ? 0 : masks.front().kept.size(); }
  std::size_t masked_per_sample() const {
    return masks.empty() ? 0 : masks.front().masked.size();
  }
  bool unmasked() const { return masked_per_sample() == 0; }
};

/// Projects the kept patches of every sample and adds position and modality
/// codes. `patches[b]` is the full patchified input of sample b.
inline TokenBatch embed(const std::vector<Tensor>& patches, const std::vector<MaskSplit>& masks,
                        Modality modality, const PatchEmbedding& embedding) {
  if (patches.empty() || patches.size() != masks.size()) {
    throw ShapeError("embed: need one mask per sample");
  }
  TokenBatch out;
  out.modality = modality;
  out.grid = embedding.grid;
  out.batch = patches.size();
  out.masks = masks;
  out.patch_len = patches.front().cols();
  const std::size_t kept = masks.front().kept.size();
  const std::size_t masked = masks.front().masked.size();
  if (kept == 0) throw ParameterError("embed: every patch is masked");
  std::vector<double> kept_rows, masked_rows;
  std::vector<std::size_t> pos_index;
  kept_rows.reserve(out.batch * kept * out.patch_len);
  for (std::size_t b = 0; b < out.batch; ++b) {
    const Tensor& p = patches[b];
    if (p.rows() != embedding.grid.size() || p.cols() != out.patch_len) {
      throw ShapeError("embed: sample " + std::to_string(b) + " has patches " +
                       shape_str(p.shape()) + " but the grid holds " +
                       std::to_string(embedding.grid.size()));
    }
    if (masks[b].kept.size() != kept || masks[b].masked.size() != masked ||
        kept + masked != p.rows()) {
      throw ShapeError("embed: inconsistent mask for sample " + std::to_string(b));
    }
    for (std::size_t idx : masks[b].kept) {
      kept_rows.insert(kept_rows.end(), p.data().begin() + idx * out.patch_len,
                       p.data().begin() + (idx + 1) * out.patch_len);
      pos_index.push_back(idx);
    }
    for (std::size_t idx : masks[b].masked) {
      masked_rows.insert(masked_rows.end(), p.data().begin() + idx * out.patch_len,
                         p.data().begin() + (idx + 1) * out.patch_len);
    }
  }
  const Tensor kept_patches({out.batch * kept, out.patch_len}, std::move(kept_rows));
  if (masked > 0) {
    out.original_patches = Tensor({out.batch * masked, out.patch_len}, std::move(masked_rows));
  }
  Tensor tokens = embedding.projection(kept_patches);
  tokens = ops::add(tokens, ops::gather_rows(embedding.position, pos_index));
  out.tokens = ops::add_row(tokens, embedding.modality);
  return out;
}

/// Patchify, mask and embed a batch of raw inputs of one modality.
template <class Rng>
TokenBatch tokenize(const std::vector<FloatArray>& inputs, std::size_t patch, double mask_ratio,
                    Modality modality, const PatchEmbedding& embedding, Rng& rng) {
  std::vector<Tensor> patches;
  std::vector<MaskSplit> masks;
  patches.reserve(inputs.size());
  for (const auto& x : inputs) {
    patches.push_back(patchify(x, patch));
    masks.push_back(mask_random(patches.back().rows(), mask_ratio, rng));
  }
  return embed(patches, masks, modality, embedding);
}

}  // namespace cavsync

#endif  // CAVSYNC_TOKENIZER_HPP_
