// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_HARNESS_SWEEP_HPP_
#define CAVSYNC_HARNESS_SWEEP_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavsync/errors.hpp"
#include "cavsync/harness/config.hpp"
#include "cavsync/harness/evaluate.hpp"
#include "cavsync/harness/pretrain.hpp"
#include "cavsync/harness/synthetic.hpp"

namespace cavsync {

/// Ablation axes the sweep command understands.
inline const std::vector<std::string>& sweep_axes() {
  static const std::vector<std::string> axes{"registers", "global",        "mask_ratio",
                                             "frames",    "segment_length", "aggregation",
                                             "correlation"};
  return axes;
}

/// Applies one axis value to a copy of `base`.
inline RunConfig sweep_point(const RunConfig& base, const std::string& axis, double value) {
  RunConfig c = base;
  auto whole = [&](const char* what) {
    if (value < 0.0 || value != std::floor(value)) {
      throw ConfigError(std::string("sweep: ") + what + " values must be non-negative integers");
    }
    return std::size_t(value);
  };
  if (axis == "registers") {
    c.model.num_registers = whole("registers");
  } else if (axis == "global") {
    c.model.use_global_token = value != 0.0;
  } else if (axis == "mask_ratio") {
    c.mask_ratio_audio = c.mask_ratio_visual = value;
  } else if (axis == "frames") {
    c.frames = whole("frames");
  } else if (axis == "segment_length") {
    c.model.audio_window = whole("segment_length");
  } else if (axis == "correlation") {
    c.correlation = value;
  } else if (axis != "aggregation") {
    throw ConfigError("sweep: unknown axis '" + axis + "'");
  }
  c.validate();
  return c;
}

/// Pretrains and evaluates retrieval once per (value, seed). The
/// aggregation axis trains once per seed; every strategy is reported.
inline nlohmann::json run_sweep(const RunConfig& base, const std::string& axis,
                                std::vector<double> values,
                                const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("sweep: need at least one seed");
  if (axis == "aggregation") values = {0.0};
  if (values.empty()) throw ConfigError("sweep: no values for axis '" + axis + "'");
  nlohmann::json points = nlohmann::json::array();
  for (double value : values) {
    nlohmann::json runs = nlohmann::json::array();
    double r1 = 0.0;
    for (std::uint64_t seed : seeds) {
      RunConfig c = sweep_point(base, axis, value);
      c.seed = seed;
      const SyntheticDataset train = generate_synthetic(c.synthetic(false));
      const SyntheticDataset eval = generate_synthetic(c.synthetic(true));
      const PretrainResult trained = run_pretrain(c, clip_views(train));
      const nlohmann::json retrieval = evaluate_retrieval(trained.state, clip_views(eval));
      r1 += mean_r1(retrieval, c.aggregation);
      runs.push_back({{"seed", seed},
                      {"last_epoch", trained.metrics.at("last_epoch")},
                      {"retrieval", retrieval}});
    }
    nlohmann::json point{{"value", value}, {"mean_r1", r1 / double(seeds.size())}, {"runs", runs}};
    if (axis == "aggregation") {
      for (const char* s : {"diag_mean", "diag_max", "block_mean", "block_max"}) {
        double m = 0.0;
        for (const auto& r : runs) m += mean_r1(r.at("retrieval"), s);
        point["mean_r1_by_strategy"][s] = m / double(runs.size());
      }
    }
    points.push_back(point);
  }
  return {{"task", "sweep"}, {"axis", axis}, {"seeds", seeds}, {"base", base.to_json()},
          {"points", points}};
}

}  // namespace cavsync

#endif  // CAVSYNC_HARNESS_SWEEP_HPP_
