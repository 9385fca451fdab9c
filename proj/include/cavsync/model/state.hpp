// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_MODEL_STATE_HPP_
#define CAVSYNC_MODEL_STATE_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cavsync/errors.hpp"
#include "cavsync/model/layers.hpp"
#include "cavsync/tokenizer.hpp"

namespace cavsync {

/// Architecture and input geometry.
struct ModelConfig {
  std::size_t dim = 768;
  std::size_t heads = 12;
  std::size_t encoder_depth = 11;
  std::size_t mlp_ratio = 4;
  std::size_t decoder_dim = 384;
  std::size_t decoder_depth = 2;
  std::size_t decoder_heads = 8;
  std::size_t num_registers = 8;
  bool use_global_token = true;
  std::size_t patch = 16;
  std::size_t mel_bins = 128;
  std::size_t audio_window = 416;
  std::size_t frame_channels = 3;
  std::size_t frame_size = 224;
  double ln_eps = 1e-6;
  double init_std = 0.02;

  PatchGrid audio_grid() const { return patch_grid(mel_bins, audio_window, patch); }
  PatchGrid visual_grid() const { return patch_grid(frame_size, frame_size, patch); }
  std::size_t audio_patch_len() const { return patch * patch; }
  std::size_t visual_patch_len() const { return patch * patch * frame_channels; }
  /// Leading non-patch tokens per modality sequence.
  std::size_t prefix_tokens() const { return (use_global_token ? 1 : 0) + num_registers; }

  void validate() const {
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw ConfigError("model config: " + what);
    };
    need(dim > 0 && heads > 0 && dim % heads == 0, "dim must be a positive multiple of heads");
    need(dim % 4 == 0, "dim must be a multiple of 4 for 2-D position codes");
    need(decoder_dim > 0 && decoder_heads > 0 && decoder_dim % decoder_heads == 0,
         "decoder_dim must be a positive multiple of decoder_heads");
    need(decoder_dim % 4 == 0, "decoder_dim must be a multiple of 4");
    need(encoder_depth >= 1, "encoder_depth must be >= 1");
    need(mlp_ratio >= 1, "mlp_ratio must be >= 1");
    need(patch > 0, "patch must be positive");
    need(mel_bins % patch == 0, "mel_bins must be divisible by patch");
    need(audio_window % patch == 0, "audio_window must be divisible by patch");
    need(frame_size % patch == 0, "frame_size must be divisible by patch");
    need(frame_channels >= 1, "frame_channels must be >= 1");
    need(ln_eps > 0.0, "ln_eps must be > 0");
  }

  /// Small architecture used by unit tests.
  static ModelConfig toy() {
    ModelConfig c;
    c.dim = 64;
    c.heads = 4;
    c.encoder_depth = 2;
    c.decoder_dim = 32;
    c.decoder_heads = 4;
    c.num_registers = 8;
    c.mel_bins = 64;
    c.audio_window = 64;
    c.frame_size = 64;
    return c;
  }
};

/// Joint layer: one set of attention/MLP weights applied in three passes,
/// each pass with its own pre-norms and output norm.
struct JointLayer {
  BlockWeights weights;
  BlockNorms norms_audio, norms_visual, norms_joint;
  LayerNorm out_audio, out_visual, out_joint;
};

struct Decoder {
  Linear embed;               // dim -> decoder_dim
  Tensor mask_token;          // [1, decoder_dim]
  Tensor modality_audio;      // [decoder_dim]
  Tensor modality_visual;     // [decoder_dim]
  Tensor position_audio;      // fixed
  Tensor position_visual;     // fixed
  std::vector<TransformerBlock> blocks;
  LayerNorm norm;
  Linear predict_audio;       // decoder_dim -> p*p
  Linear predict_visual;      // decoder_dim -> p*p*C
};

/// Every learnable parameter of the pretraining model.
///
/// Move-only: tensors are shared handles, so a plain copy would alias the
/// weights. Use clone() for an independent copy.
class ModelState {
 public:
  ModelConfig config;
  PatchEmbedding embed_audio, embed_visual;
  Tensor global_audio, global_visual;        // [1, dim]; undefined without global tokens
  Tensor registers_audio, registers_visual;  // [n_reg, dim]; undefined when n_reg == 0
  std::vector<TransformerBlock> encoder_audio, encoder_visual;
  JointLayer joint;
  Decoder decoder;

  ModelState() = default;
  ModelState(ModelState&&) = default;
  ModelState& operator=(ModelState&&) = default;
  ModelState(const ModelState&) = delete;
  ModelState& operator=(const ModelState&) = delete;

  static ModelState init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    InitRng rng(seed);
    ModelState s;
    s.config = cfg;
    const std::size_t hidden = cfg.dim * cfg.mlp_ratio;
    s.embed_audio =
        PatchEmbedding::init(cfg.audio_patch_len(), cfg.dim, cfg.audio_grid(), cfg.init_std, rng);
    s.embed_visual = PatchEmbedding::init(cfg.visual_patch_len(), cfg.dim, cfg.visual_grid(),
                                          cfg.init_std, rng);
    if (cfg.use_global_token) {
      s.global_audio = normal_param({1, cfg.dim}, cfg.init_std, rng);
      s.global_visual = normal_param({1, cfg.dim}, cfg.init_std, rng);
    }
    if (cfg.num_registers > 0) {
      s.registers_audio = normal_param({cfg.num_registers, cfg.dim}, cfg.init_std, rng);
      s.registers_visual = normal_param({cfg.num_registers, cfg.dim}, cfg.init_std, rng);
    }
    for (std::size_t i = 0; i < cfg.encoder_depth; ++i) {
      s.encoder_audio.push_back(
          TransformerBlock::init(cfg.dim, cfg.heads, hidden, cfg.ln_eps, rng));
    }
    for (std::size_t i = 0; i < cfg.encoder_depth; ++i) {
      s.encoder_visual.push_back(
          TransformerBlock::init(cfg.dim, cfg.heads, hidden, cfg.ln_eps, rng));
    }
    s.joint.weights = BlockWeights::init(cfg.dim, cfg.heads, hidden, rng);
    s.joint.norms_audio = BlockNorms::init(cfg.dim, cfg.ln_eps);
    s.joint.norms_visual = BlockNorms::init(cfg.dim, cfg.ln_eps);
    s.joint.norms_joint = BlockNorms::init(cfg.dim, cfg.ln_eps);
    s.joint.out_audio = LayerNorm::init(cfg.dim, cfg.ln_eps);
    s.joint.out_visual = LayerNorm::init(cfg.dim, cfg.ln_eps);
    s.joint.out_joint = LayerNorm::init(cfg.dim, cfg.ln_eps);

    Decoder& d = s.decoder;
    const std::size_t dd = cfg.decoder_dim;
    d.embed = Linear::init(cfg.dim, dd, rng);
    d.mask_token = normal_param({1, dd}, cfg.init_std, rng);
    d.modality_audio = normal_param({dd}, cfg.init_std, rng);
    d.modality_visual = normal_param({dd}, cfg.init_std, rng);
    d.position_audio = sincos_2d(dd, cfg.audio_grid().rows, cfg.audio_grid().cols);
    d.position_visual = sincos_2d(dd, cfg.visual_grid().rows, cfg.visual_grid().cols);
    for (std::size_t i = 0; i < cfg.decoder_depth; ++i) {
      d.blocks.push_back(
          TransformerBlock::init(dd, cfg.decoder_heads, dd * cfg.mlp_ratio, cfg.ln_eps, rng));
    }
    d.norm = LayerNorm::init(dd, cfg.ln_eps);
    d.predict_audio = Linear::init(dd, cfg.audio_patch_len(), rng);
    d.predict_visual = Linear::init(dd, cfg.visual_patch_len(), rng);
    return s;
  }

  /// All learnable tensors in a fixed order with stable names.
  ParamList parameters() const {
    ParamList out;
    embed_audio.collect(out, "patch_embed_audio");
    embed_visual.collect(out, "patch_embed_visual");
    if (global_audio.defined()) {
      out.push_back({"global_audio", "global_audio", global_audio});
      out.push_back({"global_visual", "global_visual", global_visual});
    }
    if (registers_audio.defined()) {
      out.push_back({"registers_audio", "registers_audio", registers_audio});
      out.push_back({"registers_visual", "registers_visual", registers_visual});
    }
    for (std::size_t i = 0; i < encoder_audio.size(); ++i) {
      encoder_audio[i].collect(out, "encoder_audio." + std::to_string(i), "encoder_audio");
    }
    for (std::size_t i = 0; i < encoder_visual.size(); ++i) {
      encoder_visual[i].collect(out, "encoder_visual." + std::to_string(i), "encoder_visual");
    }
    joint.weights.collect(out, "joint.shared", "joint.shared");
    joint.norms_audio.collect(out, "joint.ln_audio", "joint.ln_audio");
    joint.out_audio.collect(out, "joint.ln_audio.out", "joint.ln_audio");
    joint.norms_visual.collect(out, "joint.ln_visual", "joint.ln_visual");
    joint.out_visual.collect(out, "joint.ln_visual.out", "joint.ln_visual");
    joint.norms_joint.collect(out, "joint.ln_joint", "joint.ln_joint");
    joint.out_joint.collect(out, "joint.ln_joint.out", "joint.ln_joint");
    decoder.embed.collect(out, "decoder.embed", "decoder");
    out.push_back({"decoder.mask_token", "decoder", decoder.mask_token});
    out.push_back({"decoder.modality_audio", "decoder", decoder.modality_audio});
    out.push_back({"decoder.modality_visual", "decoder", decoder.modality_visual});
    for (std::size_t i = 0; i < decoder.blocks.size(); ++i) {
      decoder.blocks[i].collect(out, "decoder.block." + std::to_string(i), "decoder");
    }
    decoder.norm.collect(out, "decoder.norm", "decoder");
    decoder.predict_audio.collect(out, "decoder.predict_audio", "decoder");
    decoder.predict_visual.collect(out, "decoder.predict_visual", "decoder");
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor.numel();
    return n;
  }

  /// Deep copy with independent parameter storage.
  ModelState clone() const {
    ModelState copy = init(config, 0);
    auto src = parameters();
    auto dst = copy.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) {
      auto d = dst[i].tensor.mutable_data();
      std::copy(src[i].tensor.data().begin(), src[i].tensor.data().end(), d.begin());
    }
    return copy;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.tensor.zero_grad();
  }
};

}  // namespace cavsync

#endif  // CAVSYNC_MODEL_STATE_HPP_
