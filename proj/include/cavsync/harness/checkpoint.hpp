// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_HARNESS_CHECKPOINT_HPP_
#define CAVSYNC_HARNESS_CHECKPOINT_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "cavsync/errors.hpp"
#include "cavsync/model/state.hpp"
#include "cavsync/numerics/cavt.hpp"

namespace cavsync {

inline nlohmann::json model_config_json(const ModelConfig& m) {
  return {{"dim", m.dim},
          {"heads", m.heads},
          {"encoder_depth", m.encoder_depth},
          {"mlp_ratio", m.mlp_ratio},
          {"decoder_dim", m.decoder_dim},
          {"decoder_depth", m.decoder_depth},
          {"decoder_heads", m.decoder_heads},
          {"num_registers", m.num_registers},
          {"use_global_token", m.use_global_token},
          {"patch", m.patch},
          {"mel_bins", m.mel_bins},
          {"audio_window", m.audio_window},
          {"frame_channels", m.frame_channels},
          {"frame_size", m.frame_size},
          {"ln_eps", m.ln_eps},
          {"init_std", m.init_std}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig m;
    m.dim = j.at("dim");
    m.heads = j.at("heads");
    m.encoder_depth = j.at("encoder_depth");
    m.mlp_ratio = j.at("mlp_ratio");
    m.decoder_dim = j.at("decoder_dim");
    m.decoder_depth = j.at("decoder_depth");
    m.decoder_heads = j.at("decoder_heads");
    m.num_registers = j.at("num_registers");
    m.use_global_token = j.at("use_global_token");
    m.patch = j.at("patch");
    m.mel_bins = j.at("mel_bins");
    m.audio_window = j.at("audio_window");
    m.frame_channels = j.at("frame_channels");
    m.frame_size = j.at("frame_size");
    m.ln_eps = j.at("ln_eps");
    m.init_std = j.at("init_std");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint metadata: ") + e.what());
  }
}

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::size_t epochs = 0;
};

/// Writes `dir/meta.json` and one CAVT file per parameter under
/// `dir/params/`. Values are stored as float32.
inline void save_checkpoint(const std::filesystem::path& dir, const ModelState& state,
                            const CheckpointInfo& info) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "params");
  nlohmann::json meta;
  meta["format"] = "cavsync-checkpoint";
  meta["version"] = 1;
  meta["model"] = model_config_json(state.config);
  meta["seed"] = info.seed;
  meta["steps"] = info.steps;
  meta["epochs"] = info.epochs;
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : state.parameters()) {
    const std::string file = "params/" + p.name + ".cavt";
    write_cavt(dir / file, to_float_array(p.tensor));
    params.push_back({{"name", p.name}, {"group", p.group}, {"shape", p.tensor.shape()},
                      {"file", file}});
  }
  meta["parameters"] = params;
  std::ofstream out(dir / "meta.json", std::ios::trunc);
  if (!out) throw LoadError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << '\n';
}

struct LoadedCheckpoint {
  ModelState state;
  CheckpointInfo info;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw LoadError("checkpoint " + dir.string() + ": missing meta.json");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("checkpoint " + dir.string() + ": " + e.what());
  }
  if (meta.value("format", "") != "cavsync-checkpoint") {
    throw LoadError("checkpoint " + dir.string() + ": not a cavsync checkpoint");
  }
  LoadedCheckpoint out{ModelState::init(model_config_from_json(meta.at("model")), 0), {}};
  out.info.seed = meta.value("seed", std::uint64_t{0});
  out.info.steps = meta.value("steps", std::size_t{0});
  out.info.epochs = meta.value("epochs", std::size_t{0});
  auto params = out.state.parameters();
  const auto& listed = meta.at("parameters");
  if (listed.size() != params.size()) {
    throw LoadError("checkpoint " + dir.string() + ": " + std::to_string(listed.size()) +
                    " tensors listed, architecture has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string name = listed[i].at("name");
    if (name != params[i].name) {
      throw LoadError("checkpoint " + dir.string() + ": expected tensor " + params[i].name +
                      ", found " + name);
    }
    const FloatArray a = read_cavt(dir / listed[i].at("file").get<std::string>());
    if (a.shape != params[i].tensor.shape()) {
      throw LoadError("checkpoint " + dir.string() + ": tensor " + name + " has shape " +
                      shape_str(a.shape) + ", expected " + shape_str(params[i].tensor.shape()));
    }
    auto dst = params[i].tensor.mutable_data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = double(a.data[k]);
  }
  return out;
}

/// Configuration error when a checkpoint's architecture differs from the
/// requested one.
inline void require_same_architecture(const ModelConfig& have, const ModelConfig& want) {
  const nlohmann::json a = model_config_json(have), b = model_config_json(want);
  for (const auto& [key, value] : a.items()) {
    if (key == "init_std") continue;
    if (b.at(key) != value) {
      throw ConfigError("checkpoint architecture mismatch: " + key + " is " + value.dump() +
                        " in the checkpoint but " + b.at(key).dump() + " in the config");
    }
  }
}

}  // namespace cavsync

#endif  // CAVSYNC_HARNESS_CHECKPOINT_HPP_
