// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <unistd.h>

#include "cavsync/cavsync.hpp"

namespace cavsync {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("cavsync_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

SyntheticConfig small_data() {
  SyntheticConfig c;
  c.num_videos = 6;
  c.frames = 8;
  c.columns = 64;
  c.window_length = 32;
  c.mel_bins = 32;
  c.frame_size = 32;
  c.num_classes = 4;
  return c;
}

RunConfig tiny_run() {
  RunConfig c;
  c.model.dim = 16;
  c.model.heads = 2;
  c.model.encoder_depth = 1;
  c.model.decoder_dim = 8;
  c.model.decoder_heads = 2;
  c.model.num_registers = 2;
  c.model.mel_bins = 32;
  c.model.audio_window = 32;
  c.model.frame_size = 32;
  c.num_videos = 8;
  c.eval_videos = 8;
  c.frames = 8;
  c.columns = 64;
  c.num_classes = 4;
  c.batch_size = 4;
  c.epochs = 2;
  c.probe_epochs = 2;
  c.probe_width = 8;
  c.localize_images = 4;
  return c;
}

TEST(SyntheticTest, FullCorrelationSharesEventAtEveryFrame) {
  SyntheticConfig c = small_data();
  c.noise_std = 0.0;
  const SyntheticDataset ds = generate_synthetic(c);
  for (const auto& v : ds.videos) {
    for (std::size_t t = 0; t < c.frames; ++t) {
      EXPECT_EQ(v.frame_classes[t], v.audio_classes[t]);
      const std::size_t j = std::size_t(window_center(t, c.frames, c.columns));
      for (std::size_t m = 0; m < c.mel_bins; m += 7) {
        EXPECT_FLOAT_EQ(v.pair.spectrogram.data[m * c.columns + j],
                        float(ds.templates.audio_value(v.frame_classes[t], m, j)));
      }
    }
  }
}

double mutual_information(const std::vector<std::pair<std::size_t, std::size_t>>& xy, std::size_t k) {
  std::vector<double> joint(k * k, 0.0), px(k, 0.0), py(k, 0.0);
  const double n = double(xy.size());
  for (auto [x, y] : xy) {
    joint[x * k + y] += 1.0 / n;
    px[x] += 1.0 / n;
    py[y] += 1.0 / n;
  }
  double mi = 0.0;
  for (std::size_t x = 0; x < k; ++x) {
    for (std::size_t y = 0; y < k; ++y) {
      if (joint[x * k + y] > 0.0) mi += joint[x * k + y] * std::log(joint[x * k + y] / (px[x] * py[y]));
    }
  }
  return mi;
}

std::vector<std::pair<std::size_t, std::size_t>> class_pairs(double rho) {
  SyntheticConfig c = small_data();
  c.num_videos = 1000;
  c.frames = 4;
  c.frame_size = 16;
  c.mel_bins = 16;
  c.columns = 32;
  c.window_length = 16;
  c.correlation = rho;
  c.num_classes = 4;
  const SyntheticDataset ds = generate_synthetic(c);
  std::mt19937_64 rng(1);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& v : ds.videos) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, 3)(rng);
    out.emplace_back(v.frame_classes[t], v.audio_classes[t]);
  }
  return out;
}

TEST(SyntheticTest, ZeroCorrelationHasNoMutualInformation) {
  // Plug-in bias for 4x4 tables over 1000 samples is about 9 / 2000 nats.
  EXPECT_LT(mutual_information(class_pairs(0.0), 4), 0.02);
  EXPECT_GT(mutual_information(class_pairs(1.0), 4), 1.0);
}

TEST(SyntheticTest, TwoEventsGiveOneBoundary) {
  const SyntheticDataset ds = generate_synthetic(small_data());
  for (const auto& v : ds.videos) {
    ASSERT_EQ(v.boundaries.size(), 1u);
    EXPECT_EQ(segment_boundaries(v.frame_classes), v.boundaries);
    EXPECT_NE(v.frame_classes.front(), v.frame_classes.back());
  }
}

TEST(SyntheticTest, SeedDeterminesData) {
  const SyntheticDataset a = generate_synthetic(small_data());
  const SyntheticDataset b = generate_synthetic(small_data());
  SyntheticConfig other = small_data();
  other.seed = 1;
  const SyntheticDataset c = generate_synthetic(other);
  EXPECT_EQ(a.videos[2].pair.spectrogram, b.videos[2].pair.spectrogram);
  EXPECT_EQ(a.videos[2].pair.frames[3], b.videos[2].pair.frames[3]);
  EXPECT_NE(a.videos[2].pair.spectrogram, c.videos[2].pair.spectrogram);
}

TEST(SyntheticTest, ObjectMaskMatchesBox) {
  const SyntheticConfig c = small_data();
  const SyntheticDataset ds = generate_synthetic(c);
  const auto mask = ds.videos[0].object_mask(0, c.frame_size);
  std::size_t on = 0;
  for (auto m : mask) on += m;
  EXPECT_EQ(on, c.object_pixels() * c.object_pixels());
}

TEST(SyntheticTest, RejectsInvalidConfig) {
  SyntheticConfig c = small_data();
  c.correlation = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_data();
  c.events_per_video = 9;
  EXPECT_THROW(generate_synthetic(c), ConfigError);
}

TEST(ManifestTest, EmptyManifestIsEmptyDataset) {
  TempDir dir;
  std::ofstream(dir.path() / "manifest.jsonl") << "\n";
  EXPECT_TRUE(ingest_manifest(dir.path() / "manifest.jsonl", 32, 16).empty());
}

TEST(ManifestTest, RoundTripIsBitExact) {
  TempDir dir;
  const SyntheticDataset ds = generate_synthetic(small_data());
  const auto clips = clip_records(ds);
  const fs::path manifest = write_dataset(dir.path(), clips);
  const auto back = ingest_manifest(manifest, 32, 16);
  ASSERT_EQ(back.size(), clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    EXPECT_EQ(back[i].pair.id, clips[i].pair.id);
    EXPECT_EQ(back[i].pair.spectrogram, clips[i].pair.spectrogram);
    EXPECT_EQ(back[i].pair.frames, clips[i].pair.frames);
    EXPECT_EQ(back[i].pair.windows, clips[i].pair.windows);
    EXPECT_EQ(back[i].labels, clips[i].labels);
    EXPECT_EQ(back[i].frame_labels, clips[i].frame_labels);
  }
}

TEST(ManifestTest, ShortClipRejectedByName) {
  TempDir dir;
  write_cavt(dir.path() / "spec.cavt", {{128, 300}, std::vector<float>(128 * 300)});
  write_cavt(dir.path() / "f0.cavt", {{3, 16, 16}, std::vector<float>(768)});
  std::ofstream(dir.path() / "manifest.jsonl")
      << R"({"id":"short_clip","frames":["f0.cavt"],"spectrogram":"spec.cavt","labels":[0]})" << "\n";
  try {
    ingest_manifest(dir.path() / "manifest.jsonl", 416, 16);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("short_clip"), std::string::npos) << e.what();
  }
}

TEST(ManifestTest, MissingFileNamesClip) {
  TempDir dir;
  std::ofstream(dir.path() / "manifest.jsonl")
      << R"({"id":"ghost","frames":["nope.cavt"],"spectrogram":"nope.cavt","labels":[]})" << "\n";
  try {
    ingest_manifest(dir.path() / "manifest.jsonl", 32, 16);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos) << e.what();
  }
}

TEST(ConfigTest, JsonRoundTrip) {
  RunConfig a = tiny_run();
  a.temperature = 0.07;
  a.contrastive_direction = "v2a";
  a.model.use_global_token = false;
  const RunConfig b = RunConfig::from_json(a.to_json());
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(ConfigTest, UnknownKeyAndWrongType) {
  RunConfig c;
  EXPECT_THROW(c.apply_json({{"temprature", 0.1}}), ConfigError);
  EXPECT_THROW(c.apply_json({{"epochs", "ten"}}), ConfigError);
  EXPECT_THROW(c.apply_json({{"epochs", -3}}), ConfigError);
  EXPECT_THROW(c.apply_json(nlohmann::json::array()), ConfigError);
  c.apply_json({{"epochs", 3}, {"temperature", 1}});
  EXPECT_EQ(c.epochs, 3u);
  EXPECT_EQ(c.temperature, 1.0);
}

TEST(ConfigTest, ValidationCatchesBadFields) {
  auto invalid = [](auto mutate) {
    RunConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  invalid([](RunConfig& c) { c.temperature = 0.0; });
  invalid([](RunConfig& c) { c.mask_ratio_audio = 1.0; });
  invalid([](RunConfig& c) { c.batch_size = 1; });
  invalid([](RunConfig& c) { c.aggregation = "mean"; });
  invalid([](RunConfig& c) { c.contrastive_direction = "both"; });
  invalid([](RunConfig& c) { c.model.audio_window = 300; });
  invalid([](RunConfig& c) { c.segment_k = 99; });
  EXPECT_NO_THROW(RunConfig{}.validate());
}

TEST(ConfigTest, LoadFromFile) {
  TempDir dir;
  std::ofstream(dir.path() / "c.json") << R"({"seed": 9, "correlation": 0.5})";
  const RunConfig c = RunConfig::load(dir.path() / "c.json");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.correlation, 0.5);
  std::ofstream(dir.path() / "bad.json") << "{";
  EXPECT_THROW(RunConfig::load(dir.path() / "bad.json"), ConfigError);
  EXPECT_THROW(RunConfig::load(dir.path() / "missing.json"), ConfigError);
}

TEST(CheckpointTest, RoundTripAtFloatPrecision) {
  TempDir dir;
  const ModelState s = ModelState::init(tiny_run().model, 4);
  save_checkpoint(dir.path(), s, {4, 10, 2});
  const LoadedCheckpoint c = load_checkpoint(dir.path());
  EXPECT_EQ(c.info.seed, 4u);
  EXPECT_EQ(c.info.steps, 10u);
  const auto a = s.parameters(), b = c.state.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].tensor.numel(); ++k) {
      ASSERT_EQ(b[i].tensor[k], double(float(a[i].tensor[k]))) << a[i].name;
    }
  }
}

TEST(CheckpointTest, ArchitectureMismatchIsConfigError) {
  ModelConfig a = tiny_run().model, b = a;
  b.num_registers = 3;
  EXPECT_THROW(require_same_architecture(a, b), ConfigError);
  b = a;
  b.init_std = 0.5;
  EXPECT_NO_THROW(require_same_architecture(a, b));
}

TEST(CheckpointTest, MissingDirectoryIsLoadError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/checkpoint"), LoadError);
}

TEST(PretrainTest, ZeroLearningRateKeepsInitialParameters) {
  RunConfig c = tiny_run();
  c.learning_rate = 0.0;
  const SyntheticDataset ds = generate_synthetic(c.synthetic(false));
  const PretrainResult r = run_pretrain(c, clip_views(ds));
  const ModelState init = ModelState::init(c.model, c.seed);
  const auto a = init.parameters(), b = r.state.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(std::vector<double>(a[i].tensor.data().begin(), a[i].tensor.data().end()),
              std::vector<double>(b[i].tensor.data().begin(), b[i].tensor.data().end()));
  }
  EXPECT_EQ(r.steps, 4u);
}

TEST(PretrainTest, RepeatedRunIsByteIdentical) {
  TempDir dir;
  const RunConfig c = tiny_run();
  const SyntheticDataset ds = generate_synthetic(c.synthetic(false));
  std::vector<std::string> metrics;
  for (const char* name : {"a", "b"}) {
    PretrainOptions opt;
    opt.checkpoint_dir = dir.path() / name;
    opt.log_path = dir.path() / (std::string(name) + ".jsonl");
    metrics.push_back(run_pretrain(c, clip_views(ds), opt).metrics.dump());
  }
  EXPECT_EQ(metrics[0], metrics[1]);
  EXPECT_EQ(slurp(dir.path() / "a.jsonl"), slurp(dir.path() / "b.jsonl"));
  for (const auto& entry : fs::recursive_directory_iterator(dir.path() / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), dir.path() / "a");
    EXPECT_EQ(slurp(entry.path()), slurp(dir.path() / "b" / rel)) << rel;
  }
}

TEST(PretrainTest, LogHasEpochLines) {
  TempDir dir;
  const RunConfig c = tiny_run();
  const SyntheticDataset ds = generate_synthetic(c.synthetic(false));
  PretrainOptions opt;
  opt.log_path = dir.path() / "log.jsonl";
  run_pretrain(c, clip_views(ds), opt);
  std::ifstream in(opt.log_path);
  std::string line;
  std::size_t epochs = 0, steps = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.at("type") == "epoch") {
      ++epochs;
      EXPECT_TRUE(j.contains("contrastive"));
      EXPECT_TRUE(j.contains("total"));
    } else {
      ++steps;
      EXPECT_EQ(j.at("seed"), c.seed);
    }
  }
  EXPECT_EQ(epochs, 2u);
  EXPECT_EQ(steps, 4u);
}

TEST(PretrainTest, TooFewVideosForBatch) {
  RunConfig c = tiny_run();
  const SyntheticDataset ds = generate_synthetic(c.synthetic(false));
  auto views = clip_views(ds);
  views.resize(3);
  EXPECT_THROW(run_pretrain(c, views), InputError);
}

TEST(EvaluateTest, RetrievalReportsBothDirectionsAndAllStrategies) {
  const RunConfig c = tiny_run();
  const SyntheticDataset ds = generate_synthetic(c.synthetic(true));
  const ModelState s = ModelState::init(c.model, 0);
  const auto j = evaluate_retrieval(s, clip_views(ds));
  for (const char* d : {"v2a", "a2v"}) {
    for (const char* a : {"diag_mean", "diag_max", "block_mean", "block_max"}) {
      for (const char* k : {"R@1", "R@5", "R@10"}) {
        ASSERT_TRUE(j.at(d).at(a).contains(k)) << d << " " << a << " " << k;
        const double r = j[d][a][k];
        EXPECT_GE(r, 0.0);
        EXPECT_LE(r, 1.0);
      }
    }
  }
  EXPECT_DOUBLE_EQ(j.at("chance_r1").get<double>(), 1.0 / 8.0);
}

TEST(EvaluateTest, UntrainedProbeIsAtChance) {
  RunConfig c = tiny_run();
  c.probe_epochs = 0;
  c.num_classes = 4;
  c.eval_videos = 64;
  double acc = 0.0;
  const int seeds = 5;
  for (int seed = 0; seed < seeds; ++seed) {
    c.seed = std::uint64_t(seed);
    const SyntheticDataset tr = generate_synthetic(c.synthetic(false));
    const SyntheticDataset ev = generate_synthetic(c.synthetic(true));
    const ModelState s = ModelState::init(c.model, c.seed);
    acc += evaluate_probe(c, s, clip_views(tr), clip_views(ev)).at("accuracy").get<double>() / seeds;
  }
  const double p = 0.25, sigma = std::sqrt(p * (1.0 - p) / (64.0 * seeds));
  EXPECT_NEAR(acc, p, 3.0 * sigma);
}

TEST(EvaluateTest, ProbeTrainsAndReportsChance) {
  const RunConfig c = tiny_run();
  const SyntheticDataset tr = generate_synthetic(c.synthetic(false));
  const SyntheticDataset ev = generate_synthetic(c.synthetic(true));
  const auto j = evaluate_probe(c, ModelState::init(c.model, 0), clip_views(tr), clip_views(ev));
  EXPECT_EQ(j.at("chance").get<double>(), 0.25);
  EXPECT_TRUE(std::isfinite(j.at("final_train_loss").get<double>()));
}

TEST(EvaluateTest, LocalizationEmitsOneMapPerImageAndClass) {
  TempDir dir;
  const RunConfig c = tiny_run();
  const SyntheticDataset ds = generate_synthetic(c.synthetic(true));
  const auto j = evaluate_localization(c, ModelState::init(c.model, 0), ds, dir.path());
  EXPECT_EQ(j.at("maps").get<std::size_t>(), 4u * 4u);
  EXPECT_EQ(j.at("map_size").get<std::size_t>(), 32u);
  EXPECT_GE(j.at("map_min").get<double>(), -1.0);
  EXPECT_LE(j.at("map_max").get<double>(), 1.0);
  std::size_t cavt = 0;
  for (const auto& e : fs::directory_iterator(dir.path())) {
    if (e.path().extension() == ".cavt") {
      ++cavt;
      EXPECT_EQ(read_cavt(e.path()).shape, (Shape{32, 32}));
    }
  }
  EXPECT_EQ(cavt, 16u);
}

TEST(EvaluateTest, TemporalSegmentationReport) {
  const RunConfig c = tiny_run();
  const SyntheticDataset ds = generate_synthetic(c.synthetic(true));
  const auto j = evaluate_temporal_segmentation(c, ModelState::init(c.model, 0), clip_views(ds));
  EXPECT_EQ(j.at("videos").get<std::size_t>(), 8u);
  EXPECT_EQ(j.at("k").get<std::size_t>(), 2u);
  const double r = j.at("boundary_recall");
  EXPECT_GE(r, 0.0);
  EXPECT_LE(r, 1.0);
}

TEST(GradcheckTest, ReportListsEveryGroup) {
  const ModelConfig m = gradcheck_model();
  GradcheckOptions opt;
  opt.batch = 2;
  const GradcheckReport r = run_gradcheck(m, ObjectiveConfig{}, opt);
  std::set<std::string> want, got;
  for (const auto& p : ModelState::init(m, 0).parameters()) want.insert(p.group);
  for (const auto& g : r.groups) got.insert(g.group);
  EXPECT_EQ(got, want);
  EXPECT_EQ(got.size(), r.groups.size());
  EXPECT_LT(r.parameter_count, 50000u);
  EXPECT_TRUE(r.pass);
}

TEST(GradcheckTest, CorruptedGradientIsReported) {
  GradcheckOptions opt;
  opt.batch = 2;
  opt.tamper = [](ModelState& s) {
    Tensor& w = s.decoder.predict_visual.weight;
    w.mutable_grad()[0] += 1.0;
  };
  const GradcheckReport r = run_gradcheck(gradcheck_model(), ObjectiveConfig{}, opt);
  EXPECT_FALSE(r.pass);
  for (const auto& g : r.groups) EXPECT_EQ(g.pass, g.group != "decoder") << g.group;
}

TEST(GradcheckTest, RejectsLargeModels) {
  EXPECT_THROW(run_gradcheck(ModelConfig::toy(), ObjectiveConfig{}), ConfigError);
}

TEST(SweepTest, PointsApplyAxis) {
  const RunConfig base = tiny_run();
  EXPECT_EQ(sweep_point(base, "registers", 0).model.num_registers, 0u);
  EXPECT_FALSE(sweep_point(base, "global", 0).model.use_global_token);
  EXPECT_EQ(sweep_point(base, "mask_ratio", 0.6).mask_ratio_visual, 0.6);
  EXPECT_EQ(sweep_point(base, "frames", 4).frames, 4u);
  EXPECT_EQ(sweep_point(base, "segment_length", 48).model.audio_window, 48u);
  EXPECT_EQ(sweep_point(base, "correlation", 0.5).correlation, 0.5);
  EXPECT_THROW(sweep_point(base, "depth", 2), ConfigError);
  EXPECT_THROW(sweep_point(base, "registers", 1.5), ConfigError);
  EXPECT_THROW(sweep_point(base, "segment_length", 40), ConfigError);
}

TEST(SweepTest, RunsEveryValueAndSeed) {
  RunConfig base = tiny_run();
  base.epochs = 1;
  const auto j = run_sweep(base, "registers", {0, 2}, {0, 1});
  ASSERT_EQ(j.at("points").size(), 2u);
  EXPECT_EQ(j["points"][1]["runs"].size(), 2u);
  const auto agg = run_sweep(base, "aggregation", {}, {0});
  EXPECT_TRUE(agg["points"][0].contains("mean_r1_by_strategy"));
}

}  // namespace
}  // namespace cavsync
