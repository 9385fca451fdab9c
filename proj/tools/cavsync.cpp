// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: synthetic data, pretraining, evaluation,
// gradient checks and ablation sweeps.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "cavsync/cavsync.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cavsync {
namespace {

/// A split loaded from a manifest or generated synthetically. Views point
/// into the owned storage, so a Split is never copied or moved.
struct Split {
  std::optional<SyntheticDataset> synthetic;
  std::vector<ClipRecord> records;
  std::vector<ClipView> views;

  Split() = default;
  Split(const Split&) = delete;
  Split& operator=(const Split&) = delete;
};

std::unique_ptr<Split> load_split(const RunConfig& cfg, bool eval) {
  auto s = std::make_unique<Split>();
  const std::string& manifest = eval ? cfg.eval_manifest : cfg.train_manifest;
  if (manifest.empty()) {
    s->synthetic = generate_synthetic(cfg.synthetic(eval));
    s->views = clip_views(*s->synthetic);
  } else {
    s->records = ingest_manifest(manifest, cfg.model.audio_window, cfg.model.patch);
    if (s->records.empty()) throw InputError("manifest " + manifest + " lists no clips");
    s->views = clip_views(s->records);
  }
  return s;
}

/// Flag values as typed text, keyed by RunConfig field name.
struct Overrides {
  std::map<std::string, std::string> raw;

  void attach(CLI::App* app) {
    RunConfig defaults;
    defaults.visit([&](const char* name, const auto& field) {
      using T = std::decay_t<decltype(field)>;
      std::ostringstream def;
      if constexpr (std::is_same_v<T, bool>) {
        def << (field ? "true" : "false");
      } else {
        def << json(field).dump();
      }
      app->add_option_function<std::string>(
             std::string("--") + name,
             [this, key = std::string(name)](const std::string& v) { raw[key] = v; },
             "default " + def.str())
          ->group("Run configuration");
    });
  }

  json to_json() const {
    RunConfig probe;
    json out = json::object();
    probe.visit([&](const char* name, const auto& field) {
      const auto it = raw.find(name);
      if (it == raw.end()) return;
      using T = std::decay_t<decltype(field)>;
      const std::string& v = it->second;
      if constexpr (std::is_same_v<T, std::string>) {
        out[name] = v;
      } else if constexpr (std::is_same_v<T, bool>) {
        if (v == "true" || v == "1") {
          out[name] = true;
        } else if (v == "false" || v == "0") {
          out[name] = false;
        } else {
          throw ConfigError(std::string("--") + name + ": expected true or false, got '" + v + "'");
        }
      } else {
        try {
          out[name] = json::parse(v);
        } catch (const json::exception&) {
          throw ConfigError(std::string("--") + name + ": expected a number, got '" + v + "'");
        }
      }
    });
    return out;
  }
};

struct Common {
  std::string config_path;
  std::string out_path;
  Overrides overrides;
  bool seed_required = false;

  void attach(CLI::App* app, bool require_seed) {
    seed_required = require_seed;
    app->add_option("--config", config_path, "JSON run configuration; flags override it")
        ->check(CLI::ExistingFile);
    app->add_option("--out", out_path, "write metrics JSON here instead of stdout");
    overrides.attach(app);
  }

  RunConfig resolve() const {
    if (seed_required && !overrides.raw.count("seed")) {
      throw ConfigError("--seed is required for this command");
    }
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    cfg.apply_json(overrides.to_json());
    cfg.validate();
    return cfg;
  }

  void emit(const json& metrics) const {
    const std::string text = metrics.dump(2) + "\n";
    if (out_path.empty()) {
      std::cout << text;
      return;
    }
    if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw LoadError("cannot write " + out_path);
    out << text;
  }
};

ModelState model_for(const RunConfig& cfg, const std::string& checkpoint, json& info) {
  if (checkpoint.empty()) {
    info = nullptr;
    return ModelState::init(cfg.model, cfg.seed);
  }
  LoadedCheckpoint c = load_checkpoint(checkpoint);
  require_same_architecture(c.state.config, cfg.model);
  info = {{"path", checkpoint}, {"seed", c.info.seed}, {"steps", c.info.steps}};
  return std::move(c.state);
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": '" + item + "' is not a number");
    }
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"cavsync: contrastive audio-visual masked autoencoding at desk scale"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  std::string data_dir, split = "train", checkpoint, log_path, dump_dir, axis, values, seeds;

  Common synth_opts, pretrain_opts, probe_opts, retrieve_opts, localize_opts, segment_opts,
      grad_opts, sweep_opts;

  CLI::App* synth = app.add_subcommand("synth", "write a synthetic dataset as CAVT + manifest");
  synth_opts.attach(synth, false);
  synth->add_option("--data-dir", data_dir, "output directory")->required();
  synth->add_option("--split", split, "train or eval")->check(CLI::IsMember({"train", "eval"}));

  CLI::App* pretrain = app.add_subcommand("pretrain", "pretrain the model");
  pretrain_opts.attach(pretrain, true);
  pretrain->add_option("--checkpoint", checkpoint, "checkpoint directory to write");
  pretrain->add_option("--log", log_path, "JSON-lines training log");

  CLI::App* probe = app.add_subcommand("probe", "frozen-encoder classification probe");
  probe_opts.attach(probe, true);
  probe->add_option("--checkpoint", checkpoint, "checkpoint to evaluate (default: untrained)");

  CLI::App* retrieve = app.add_subcommand("retrieve", "cross-modal retrieval Recall@k");
  retrieve_opts.attach(retrieve, false);
  retrieve->add_option("--checkpoint", checkpoint, "checkpoint to evaluate (default: untrained)");

  CLI::App* localize = app.add_subcommand("localize", "sound-prompted localisation maps");
  localize_opts.attach(localize, false);
  localize->add_option("--checkpoint", checkpoint, "checkpoint to evaluate (default: untrained)");
  localize->add_option("--dump-dir", dump_dir, "write maps as CAVT and PGM here");

  CLI::App* segment = app.add_subcommand("segment", "intra-clip temporal segmentation");
  segment_opts.attach(segment, false);
  segment->add_option("--checkpoint", checkpoint, "checkpoint to evaluate (default: untrained)");

  CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference check of every parameter group");
  grad_opts.attach(grad, false);
  double fd_step = 1e-5, fd_tol = 1e-4;
  grad->add_option("--step", fd_step, "central-difference step");
  grad->add_option("--tolerance", fd_tol, "maximum relative error per group");

  CLI::App* sweep = app.add_subcommand("sweep", "ablation grid over one axis");
  sweep_opts.attach(sweep, true);
  sweep->add_option("--axis", axis, "one of: registers, global, mask_ratio, frames, "
                                    "segment_length, aggregation, correlation")
      ->required();
  sweep->add_option("--values", values, "comma-separated axis values");
  sweep->add_option("--seeds", seeds, "comma-separated seeds (default: --seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (synth->parsed()) {
    const RunConfig cfg = synth_opts.resolve();
    const bool eval = split == "eval";
    const SyntheticDataset ds = generate_synthetic(cfg.synthetic(eval));
    const fs::path manifest = write_dataset(data_dir, clip_records(ds));
    synth_opts.emit({{"task", "synth"},
                     {"split", split},
                     {"videos", ds.videos.size()},
                     {"manifest", manifest.string()},
                     {"seed", cfg.synthetic(eval).seed},
                     {"config", cfg.to_json()}});
  } else if (pretrain->parsed()) {
    const RunConfig cfg = pretrain_opts.resolve();
    const auto data = load_split(cfg, false);
    PretrainOptions opt;
    opt.checkpoint_dir = checkpoint;
    opt.log_path = log_path;
    opt.on_epoch = [&](const EpochSummary& e) {
      std::cerr << "epoch " << e.epoch << "/" << cfg.epochs << "  total " << e.total
                << "  contrastive " << e.contrastive << "  recon " << e.reconstruction << "\n";
    };
    const PretrainResult r = run_pretrain(cfg, data->views, opt);
    pretrain_opts.emit(r.metrics);
  } else if (probe->parsed()) {
    const RunConfig cfg = probe_opts.resolve();
    json info;
    const ModelState state = model_for(cfg, checkpoint, info);
    const auto train = load_split(cfg, false);
    const auto eval = load_split(cfg, true);
    json m = evaluate_probe(cfg, state, train->views, eval->views);
    m["checkpoint"] = info;
    probe_opts.emit(m);
  } else if (retrieve->parsed()) {
    const RunConfig cfg = retrieve_opts.resolve();
    json info;
    const ModelState state = model_for(cfg, checkpoint, info);
    const auto eval = load_split(cfg, true);
    json m = evaluate_retrieval(state, eval->views);
    m["task"] = "retrieve";
    m["default_strategy"] = cfg.aggregation;
    m["mean_r1"] = mean_r1(m, cfg.aggregation);
    m["checkpoint"] = info;
    retrieve_opts.emit(m);
  } else if (localize->parsed()) {
    const RunConfig cfg = localize_opts.resolve();
    if (!cfg.eval_manifest.empty()) {
      throw ConfigError("localize scores against synthetic object masks; unset eval_manifest");
    }
    json info;
    const ModelState state = model_for(cfg, checkpoint, info);
    const SyntheticDataset ds = generate_synthetic(cfg.synthetic(true));
    json m = evaluate_localization(cfg, state, ds, dump_dir);
    m["checkpoint"] = info;
    localize_opts.emit(m);
  } else if (segment->parsed()) {
    const RunConfig cfg = segment_opts.resolve();
    json info;
    const ModelState state = model_for(cfg, checkpoint, info);
    const auto eval = load_split(cfg, true);
    json m = evaluate_temporal_segmentation(cfg, state, eval->views);
    m["checkpoint"] = info;
    segment_opts.emit(m);
  } else if (grad->parsed()) {
    const RunConfig cfg = grad_opts.resolve();
    if (!(fd_step > 0.0)) throw ParameterError("--step must be > 0");
    GradcheckOptions opt;
    opt.step = fd_step;
    opt.tolerance = fd_tol;
    opt.seed = cfg.seed;
    const GradcheckReport r = run_gradcheck(gradcheck_model(), cfg.objective(), opt);
    grad_opts.emit(r.to_json());
    return r.pass ? 0 : 1;
  } else if (sweep->parsed()) {
    const RunConfig cfg = sweep_opts.resolve();
    std::vector<std::uint64_t> seed_list;
    if (seeds.empty()) {
      seed_list.push_back(cfg.seed);
    } else {
      for (double s : parse_list(seeds, "--seeds")) {
        if (s < 0 || s != double(std::uint64_t(s))) throw ConfigError("--seeds must be non-negative integers");
        seed_list.push_back(std::uint64_t(s));
      }
    }
    const auto& axes = sweep_axes();
    if (std::find(axes.begin(), axes.end(), axis) == axes.end()) {
      throw ConfigError("unknown sweep axis '" + axis + "'");
    }
    std::vector<double> grid = parse_list(values, "--values");
    if (grid.empty() && axis != "aggregation") throw ConfigError("--values is required for axis " + axis);
    for (double v : grid) sweep_point(cfg, axis, v);
    sweep_opts.emit(run_sweep(cfg, axis, grid, seed_list));
  }
  return 0;
}

}  // namespace
}  // namespace cavsync

int main(int argc, char** argv) {
  try {
    return cavsync::run(argc, argv);
  } catch (const cavsync::ValidationError& e) {
    std::cerr << "cavsync: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "cavsync: " << e.what() << "\n";
    return 1;
  }
}
