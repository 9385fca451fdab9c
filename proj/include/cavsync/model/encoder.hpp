// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_MODEL_ENCODER_HPP_
#define CAVSYNC_MODEL_ENCODER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cavsync/errors.hpp"
#include "cavsync/model/state.hpp"
#include "cavsync/numerics/ops.hpp"
#include "cavsync/tokenizer.hpp"

namespace cavsync {

/// Row layout of the per-modality sequences: [global?, registers, patches].
struct SequenceLayout {
  std::size_t batch = 0;
  bool has_global = true;
  std::size_t registers = 0;
  std::size_t kept_audio = 0;
  std::size_t kept_visual = 0;

  std::size_t prefix() const { return (has_global ? 1 : 0) + registers; }
  std::size_t length_audio() const { return prefix() + kept_audio; }
  std::size_t length_visual() const { return prefix() + kept_visual; }
  std::size_t length(Modality m) const {
    return m == Modality::kAudio ? length_audio() : length_visual();
  }
  std::size_t kept(Modality m) const { return m == Modality::kAudio ? kept_audio : kept_visual; }
};

/// Encoder and joint-layer outputs for a batch of samples.
struct EncodedPair {
  SequenceLayout layout;
  Tensor z_audio, z_visual;  // single-modality encoder outputs
  Tensor h_audio, h_visual;  // joint passes 1 and 2, [batch * length, dim]
  Tensor g_audio, g_visual;  // [batch, dim]: global outputs, or pooled patches without globals
  Tensor joint_tokens;       // joint pass 3, [batch * (len_a + len_v), dim]
  std::vector<MaskSplit> masks_audio, masks_visual;
  PatchGrid grid_audio, grid_visual;

  const Tensor& h(Modality m) const { return m == Modality::kAudio ? h_audio : h_visual; }
  const Tensor& g(Modality m) const { return m == Modality::kAudio ? g_audio : g_visual; }
  bool visual_unmasked() const { return layout.kept_visual == grid_visual.size(); }
};

namespace detail {

/// Builds [batch * (prefix + kept), dim] sequences from shared prefix tokens
/// and per-sample patch tokens.
inline Tensor assemble_sequences(const Tensor& global, const Tensor& registers,
                                 const Tensor& tokens, std::size_t batch, std::size_t kept) {
  std::vector<Tensor> sources;
  std::size_t n_global = 0, n_reg = 0;
  if (global.defined()) {
    sources.push_back(global);
    n_global = 1;
  }
  if (registers.defined()) {
    sources.push_back(registers);
    n_reg = registers.rows();
  }
  sources.push_back(tokens);
  const Tensor pool = ops::concat_rows(sources);
  const std::size_t prefix = n_global + n_reg;
  std::vector<std::size_t> index;
  index.reserve(batch * (prefix + kept));
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < prefix; ++j) index.push_back(j);
    for (std::size_t j = 0; j < kept; ++j) index.push_back(prefix + b * kept + j);
  }
  return ops::gather_rows(pool, index);
}

inline Tensor run_joint_pass(const Tensor& x, const JointLayer& joint, const BlockNorms& norms,
                             const LayerNorm& out, std::size_t seq_len) {
  return out(block_forward(x, joint.weights, norms, seq_len));
}

inline std::vector<std::size_t> rows_at(std::size_t batch, std::size_t stride,
                                        std::size_t offset, std::size_t count) {
  std::vector<std::size_t> idx;
  idx.reserve(batch * count);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < count; ++j) idx.push_back(b * stride + offset + j);
  }
  return idx;
}

}  // namespace detail

/// Mean of the patch-token outputs of one single-modality joint pass,
/// [batch, dim]. Globals and registers are excluded.
inline Tensor pooled_repr(const Tensor& h, const SequenceLayout& layout, Modality m) {
  const std::size_t len = layout.length(m);
  if (layout.kept(m) == 0) throw ShapeError("pooled_repr: no patch tokens");
  return ops::segment_mean_rows(h, len, layout.prefix(), len);
}

inline Tensor pooled_repr(const EncodedPair& pair, Modality m) {
  return pooled_repr(pair.h(m), pair.layout, m);
}

/// Runs both single-modality encoders and the three joint passes.
inline EncodedPair encode(const TokenBatch& audio, const TokenBatch& visual,
                          const ModelState& state) {
  const ModelConfig& cfg = state.config;
  if (audio.batch != visual.batch || audio.batch == 0) {
    throw ShapeError("encode: audio batch " + std::to_string(audio.batch) +
                     " vs visual batch " + std::to_string(visual.batch));
  }
  if (audio.tokens.cols() != cfg.dim || visual.tokens.cols() != cfg.dim) {
    throw ShapeError("encode: token width " + std::to_string(audio.tokens.cols()) + "/" +
                     std::to_string(visual.tokens.cols()) + " vs model dim " +
                     std::to_string(cfg.dim));
  }
  EncodedPair out;
  out.layout.batch = audio.batch;
  out.layout.has_global = cfg.use_global_token;
  out.layout.registers = cfg.num_registers;
  out.layout.kept_audio = audio.kept_per_sample();
  out.layout.kept_visual = visual.kept_per_sample();
  out.masks_audio = audio.masks;
  out.masks_visual = visual.masks;
  out.grid_audio = audio.grid;
  out.grid_visual = visual.grid;
  const SequenceLayout& L = out.layout;
  const std::size_t B = L.batch, La = L.length_audio(), Lv = L.length_visual();

  Tensor za = detail::assemble_sequences(state.global_audio, state.registers_audio,
                                         audio.tokens, B, L.kept_audio);
  for (const auto& blk : state.encoder_audio) za = blk(za, La);
  Tensor zv = detail::assemble_sequences(state.global_visual, state.registers_visual,
                                         visual.tokens, B, L.kept_visual);
  for (const auto& blk : state.encoder_visual) zv = blk(zv, Lv);
  out.z_audio = za;
  out.z_visual = zv;

  const JointLayer& J = state.joint;
  out.h_audio = detail::run_joint_pass(za, J, J.norms_audio, J.out_audio, La);
  out.h_visual = detail::run_joint_pass(zv, J, J.norms_visual, J.out_visual, Lv);

  // Pass 3: per sample, audio sequence followed by visual sequence.
  std::vector<std::size_t> interleave;
  interleave.reserve(B * (La + Lv));
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t j = 0; j < La; ++j) interleave.push_back(b * La + j);
    for (std::size_t j = 0; j < Lv; ++j) interleave.push_back(B * La + b * Lv + j);
  }
  const Tensor joint_in = ops::gather_rows(ops::concat_rows({za, zv}), interleave);
  out.joint_tokens =
      detail::run_joint_pass(joint_in, J, J.norms_joint, J.out_joint, La + Lv);

  if (L.has_global) {
    out.g_audio = ops::gather_rows(out.h_audio, detail::rows_at(B, La, 0, 1));
    out.g_visual = ops::gather_rows(out.h_visual, detail::rows_at(B, Lv, 0, 1));
  } else {
    out.g_audio = pooled_repr(out, Modality::kAudio);
    out.g_visual = pooled_repr(out, Modality::kVisual);
  }
  return out;
}

/// Register outputs of a single-modality pass, [batch * n_reg, dim].
inline Tensor register_outputs(const EncodedPair& pair, Modality m) {
  const SequenceLayout& L = pair.layout;
  if (L.registers == 0) throw ConfigError("register outputs requested but n_reg == 0");
  return ops::gather_rows(pair.h(m), detail::rows_at(L.batch, L.length(m),
                                                     L.has_global ? 1 : 0, L.registers));
}

/// Patch-token outputs of a single-modality pass, [batch * kept, dim].
inline Tensor patch_outputs(const EncodedPair& pair, Modality m) {
  const SequenceLayout& L = pair.layout;
  return ops::gather_rows(pair.h(m), detail::rows_at(L.batch, L.length(m), L.prefix(), L.kept(m)));
}

/// Predicted patch vectors at the masked positions, sample-major and in
/// ascending position order within a sample (matching
/// TokenBatch::original_patches). Undefined when nothing is masked.
struct Reconstruction {
  Tensor audio;
  Tensor visual;
};

/// Joint decoder: patch tokens from pass 3 plus mask tokens, full grids of
/// both modalities in one sequence.
inline Reconstruction decode(const EncodedPair& pair, const ModelState& state) {
  const Decoder& D = state.decoder;
  const SequenceLayout& L = pair.layout;
  const std::size_t B = L.batch, La = L.length_audio(), Lv = L.length_visual();
  const std::size_t Ka = L.kept_audio, Kv = L.kept_visual;
  const std::size_t Na = pair.grid_audio.size(), Nv = pair.grid_visual.size();

  std::vector<std::size_t> patch_rows;
  patch_rows.reserve(B * (Ka + Kv));
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t base = b * (La + Lv);
    for (std::size_t j = 0; j < Ka; ++j) patch_rows.push_back(base + L.prefix() + j);
    for (std::size_t j = 0; j < Kv; ++j) patch_rows.push_back(base + La + L.prefix() + j);
  }
  const Tensor visible = D.embed(ops::gather_rows(pair.joint_tokens, patch_rows));
  const Tensor pool = ops::concat_rows({visible, D.mask_token});
  const std::size_t mask_row = B * (Ka + Kv);

  // Full-grid sequence per sample: audio cells then visual cells.
  std::vector<std::size_t> seq_index, pos_index, modality_index;
  seq_index.reserve(B * (Na + Nv));
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<std::size_t> slot(Na, mask_row);
    const auto& ka = pair.masks_audio[b].kept;
    for (std::size_t r = 0; r < ka.size(); ++r) slot[ka[r]] = b * (Ka + Kv) + r;
    for (std::size_t p = 0; p < Na; ++p) {
      seq_index.push_back(slot[p]);
      pos_index.push_back(p);
      modality_index.push_back(0);
    }
    slot.assign(Nv, mask_row);
    const auto& kv = pair.masks_visual[b].kept;
    for (std::size_t r = 0; r < kv.size(); ++r) slot[kv[r]] = b * (Ka + Kv) + Ka + r;
    for (std::size_t p = 0; p < Nv; ++p) {
      seq_index.push_back(slot[p]);
      pos_index.push_back(Na + p);
      modality_index.push_back(1);
    }
  }
  const Tensor positions = ops::concat_rows({D.position_audio, D.position_visual});
  const Tensor modalities = ops::concat_rows(
      {ops::reshape(D.modality_audio, {1, D.modality_audio.numel()}),
       ops::reshape(D.modality_visual, {1, D.modality_visual.numel()})});
  Tensor x = ops::gather_rows(pool, seq_index);
  x = ops::add(x, ops::gather_rows(positions, pos_index));
  x = ops::add(x, ops::gather_rows(modalities, modality_index));
  for (const auto& blk : D.blocks) x = blk(x, Na + Nv);
  x = D.norm(x);

  Reconstruction out;
  std::vector<std::size_t> audio_rows, visual_rows;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t p : pair.masks_audio[b].masked) audio_rows.push_back(b * (Na + Nv) + p);
    for (std::size_t p : pair.masks_visual[b].masked) {
      visual_rows.push_back(b * (Na + Nv) + Na + p);
    }
  }
  if (!audio_rows.empty()) out.audio = D.predict_audio(ops::gather_rows(x, audio_rows));
  if (!visual_rows.empty()) out.visual = D.predict_visual(ops::gather_rows(x, visual_rows));
  return out;
}

/// Dense 2-D map of doubles, row-major.
struct Map2D {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Bilinear resize with half-pixel centres and edge clamping, so every
/// output is a convex combination of input cells.
inline Map2D bilinear_upsample(const Map2D& in, std::size_t rows, std::size_t cols) {
  Map2D out{rows, cols, std::vector<double>(rows * cols)};
  const double sy = double(in.rows) / double(rows), sx = double(in.cols) / double(cols);
  for (std::size_t y = 0; y < rows; ++y) {
    const double fy = std::clamp((double(y) + 0.5) * sy - 0.5, 0.0, double(in.rows - 1));
    const std::size_t y0 = static_cast<std::size_t>(std::floor(fy));
    const std::size_t y1 = std::min(y0 + 1, in.rows - 1);
    const double wy = fy - double(y0);
    for (std::size_t x = 0; x < cols; ++x) {
      const double fx = std::clamp((double(x) + 0.5) * sx - 0.5, 0.0, double(in.cols - 1));
      const std::size_t x0 = static_cast<std::size_t>(std::floor(fx));
      const std::size_t x1 = std::min(x0 + 1, in.cols - 1);
      const double wx = fx - double(x0);
      const double top = (1.0 - wx) * in.at(y0, x0) + wx * in.at(y0, x1);
      const double bottom = (1.0 - wx) * in.at(y1, x0) + wx * in.at(y1, x1);
      out.values[y * cols + x] = (1.0 - wy) * top + wy * bottom;
    }
  }
  return out;
}

/// Cosine similarity between one audio global vector and every visual patch
/// token, laid out on the patch grid.
inline Map2D cosine_map(std::span<const double> audio_global, const Tensor& visual_patches,
                        PatchGrid grid) {
  const std::size_t dim = audio_global.size();
  if (visual_patches.cols() != dim || visual_patches.rows() != grid.size()) {
    throw ShapeError("cosine_map: " + shape_str(visual_patches.shape()) + " patches for a " +
                     std::to_string(grid.rows) + "x" + std::to_string(grid.cols) + " grid");
  }
  double gn = 0.0;
  for (double v : audio_global) gn += v * v;
  gn = std::sqrt(gn);
  if (!(gn > 0.0)) throw NumericError("cosine_map: zero-norm audio vector");
  Map2D map{grid.rows, grid.cols, std::vector<double>(grid.size())};
  for (std::size_t p = 0; p < grid.size(); ++p) {
    double dot = 0.0, pn = 0.0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double v = visual_patches[p * dim + c];
      dot += v * audio_global[c];
      pn += v * v;
    }
    pn = std::sqrt(pn);
    if (!(pn > 0.0)) throw NumericError("cosine_map: zero-norm visual patch");
    map.values[p] = std::clamp(dot / (gn * pn), -1.0, 1.0);
  }
  return map;
}

/// Sound-prompted localisation for sample b of an unmasked forward pass:
/// the grid-resolution cosine map and its upsampling to the frame size.
struct LocalizationMap {
  Map2D grid;
  Map2D full;
};

inline LocalizationMap localization_map(const EncodedPair& pair, std::size_t b,
                                        std::size_t frame_size) {
  if (!pair.visual_unmasked()) {
    throw ContractError("localization_map: visual input was masked (" +
                        std::to_string(pair.layout.kept_visual) + " of " +
                        std::to_string(pair.grid_visual.size()) + " patches kept)");
  }
  const SequenceLayout& L = pair.layout;
  if (b >= L.batch) throw ParameterError("localization_map: sample index out of range");
  const std::size_t dim = pair.h_visual.cols();
  const std::size_t Lv = L.length_visual(), Nv = pair.grid_visual.size();
  std::vector<double> patches(Nv * dim);
  std::copy_n(pair.h_visual.data().begin() + (b * Lv + L.prefix()) * dim, Nv * dim,
              patches.begin());
  const std::span<const double> g(pair.g_audio.data().data() + b * dim, dim);
  LocalizationMap out;
  out.grid = cosine_map(g, Tensor({Nv, dim}, std::move(patches)), pair.grid_visual);
  out.full = bilinear_upsample(out.grid, frame_size, frame_size);
  return out;
}

}  // namespace cavsync

#endif  // CAVSYNC_MODEL_ENCODER_HPP_
