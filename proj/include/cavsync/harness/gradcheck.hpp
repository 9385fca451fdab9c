// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_HARNESS_GRADCHECK_HPP_
#define CAVSYNC_HARNESS_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "cavsync/errors.hpp"
#include "cavsync/model/state.hpp"
#include "cavsync/numerics/finite_diff.hpp"
#include "cavsync/train.hpp"

namespace cavsync {

/// Architecture small enough to finite-difference every parameter: width
/// 16, one encoder layer, four patches per modality.
inline ModelConfig gradcheck_model() {
  ModelConfig c;
  c.dim = 16;
  c.heads = 2;
  c.encoder_depth = 1;
  c.mlp_ratio = 2;
  c.decoder_dim = 8;
  c.decoder_depth = 1;
  c.decoder_heads = 2;
  c.num_registers = 2;
  c.patch = 4;
  c.mel_bins = 8;
  c.audio_window = 8;
  c.frame_channels = 3;
  c.frame_size = 8;
  return c;
}

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  double floor = 1e-6;  // denominator floor for near-zero gradients
  std::size_t batch = 3;
  std::uint64_t seed = 0;
  std::size_t max_parameters = 50000;
  /// Applied to the model after the analytic backward pass and before its
  /// gradients are read. Test fixtures use it to corrupt gradients.
  std::function<void(ModelState&)> tamper;
};

struct GradcheckGroup {
  std::string group;
  std::size_t elements = 0;
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
  std::string worst_tensor;
  bool pass = false;
};

struct GradcheckReport {
  std::vector<GradcheckGroup> groups;
  std::size_t parameter_count = 0;
  double tolerance = 0.0;
  double step = 0.0;
  bool pass = false;

  nlohmann::json to_json() const {
    nlohmann::json g = nlohmann::json::array();
    for (const auto& x : groups) {
      g.push_back({{"group", x.group},
                   {"elements", x.elements},
                   {"max_relative_error", x.max_relative_error},
                   {"max_abs_error", x.max_abs_error},
                   {"worst_tensor", x.worst_tensor},
                   {"pass", x.pass}});
    }
    return {{"task", "gradcheck"}, {"parameter_count", parameter_count}, {"tolerance", tolerance},
            {"step", step},        {"pass", pass},                       {"groups", g}};
  }
};

/// Compares reverse-mode gradients of the full pretraining loss with
/// central differences for every parameter, grouped by parameter group.
inline GradcheckReport run_gradcheck(const ModelConfig& model, const ObjectiveConfig& objective,
                                     const GradcheckOptions& opt = {}) {
  ModelState state = ModelState::init(model, opt.seed);
  const std::size_t count = state.parameter_count();
  if (count >= opt.max_parameters) {
    throw ConfigError("gradcheck: " + std::to_string(count) + " parameters; the toy limit is " +
                      std::to_string(opt.max_parameters));
  }
  std::mt19937_64 data_rng(opt.seed + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<FrameWindowSample> batch;
  for (std::size_t b = 0; b < opt.batch; ++b) {
    FrameWindowSample s;
    s.frame = {{model.frame_channels, model.frame_size, model.frame_size}, {}};
    s.window = {{model.mel_bins, model.audio_window}, {}};
    s.frame.data.resize(shape_numel(s.frame.shape));
    s.window.data.resize(shape_numel(s.window.shape));
    for (float& v : s.frame.data) v = float(normal(data_rng));
    for (float& v : s.window.data) v = float(normal(data_rng));
    s.index = b;
    batch.push_back(std::move(s));
  }
  auto loss = [&] {
    std::mt19937_64 mask_rng(opt.seed + 2);
    return compute_losses(batch, state, objective, mask_rng).total;
  };

  state.zero_grad();
  loss().backward();
  if (opt.tamper) opt.tamper(state);
  ParamList params = state.parameters();
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) {
    std::vector<double> g(p.tensor.numel(), 0.0);
    if (p.tensor.has_grad()) std::copy(p.tensor.grad().begin(), p.tensor.grad().end(), g.begin());
    analytic.push_back(std::move(g));
  }

  GradcheckReport report;
  report.parameter_count = count;
  report.tolerance = opt.tolerance;
  report.step = opt.step;
  std::map<std::string, std::size_t> index;
  NoGradGuard no_grad;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::vector<double> numeric =
        finite_diff_inplace([&] { return loss().item(); }, params[i].tensor, opt.step);
    auto [it, fresh] = index.emplace(params[i].group, report.groups.size());
    if (fresh) {
      GradcheckGroup g;
      g.group = params[i].group;
      report.groups.push_back(std::move(g));
    }
    GradcheckGroup& g = report.groups[it->second];
    g.elements += numeric.size();
    const double rel = max_relative_error(analytic[i], numeric, opt.floor);
    for (std::size_t k = 0; k < numeric.size(); ++k) {
      g.max_abs_error = std::max(g.max_abs_error, std::abs(analytic[i][k] - numeric[k]));
    }
    if (rel >= g.max_relative_error) {
      g.max_relative_error = rel;
      g.worst_tensor = params[i].name;
    }
  }
  report.pass = true;
  for (auto& g : report.groups) {
    g.pass = g.max_relative_error < opt.tolerance;
    report.pass = report.pass && g.pass;
  }
  return report;
}

}  // namespace cavsync

#endif  // CAVSYNC_HARNESS_GRADCHECK_HPP_
