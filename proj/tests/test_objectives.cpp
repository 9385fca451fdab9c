// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "cavsync/objectives.hpp"
#include "cavsync/train.hpp"
#include "test_util.hpp"

namespace cavsync {
namespace {

using testing::random_tensor;

TEST(ContrastiveTest, OrthonormalPairsClosedForm) {
  const Tensor e({2, 2}, {1, 0, 0, 1});
  const double want = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  EXPECT_NEAR(contrastive_loss(e, e, 1.0, ContrastiveDirection::kVisualToAudio).item(), want, 1e-12);
  EXPECT_NEAR(want, 0.31326, 1e-5);
}

TEST(ContrastiveTest, UniformSimilarityGivesLogN) {
  for (std::size_t n : {2u, 3u, 7u}) {
    const Tensor v = Tensor::full({n, 4}, 1.0);
    for (auto d : {ContrastiveDirection::kVisualToAudio, ContrastiveDirection::kAudioToVisual,
                   ContrastiveDirection::kSymmetric}) {
      EXPECT_NEAR(contrastive_loss(v, v, 0.05, d).item(), std::log(double(n)), 1e-9);
    }
  }
}

TEST(ContrastiveTest, SymmetricOnSymmetricSimilarity) {
  const Tensor g = random_tensor({5, 6}, 1, false);
  const double v2a = contrastive_loss(g, g, 0.3, ContrastiveDirection::kVisualToAudio).item();
  const double sym = contrastive_loss(g, g, 0.3, ContrastiveDirection::kSymmetric).item();
  EXPECT_NEAR(sym, v2a, 1e-12);
}

TEST(ContrastiveTest, DirectionsDifferOnAsymmetricInput) {
  const Tensor v = random_tensor({4, 6}, 1, false), a = random_tensor({4, 6}, 2, false);
  const double v2a = contrastive_loss(v, a, 0.1, ContrastiveDirection::kVisualToAudio).item();
  const double a2v = contrastive_loss(v, a, 0.1, ContrastiveDirection::kAudioToVisual).item();
  const double sym = contrastive_loss(v, a, 0.1, ContrastiveDirection::kSymmetric).item();
  EXPECT_NE(v2a, a2v);
  EXPECT_NEAR(sym, 0.5 * (v2a + a2v), 1e-12);
}

TEST(ContrastiveTest, ScaleInvariant) {
  const Tensor v = random_tensor({4, 6}, 1, false), a = random_tensor({4, 6}, 2, false);
  std::vector<double> scaled(v.data().begin(), v.data().end());
  for (std::size_t c = 0; c < 6; ++c) scaled[6 + c] *= 17.0;
  const double base = contrastive_loss(v, a, 0.1, ContrastiveDirection::kSymmetric).item();
  EXPECT_NEAR(contrastive_loss(Tensor({4, 6}, scaled), a, 0.1, ContrastiveDirection::kSymmetric).item(),
              base, 1e-12);
}

TEST(ContrastiveTest, PermutationEquivariant) {
  const Tensor v = random_tensor({5, 3}, 1, false), a = random_tensor({5, 3}, 2, false);
  const std::vector<std::size_t> perm{3, 0, 4, 2, 1};
  const double base = contrastive_loss(v, a, 0.2, ContrastiveDirection::kVisualToAudio).item();
  const double permuted = contrastive_loss(ops::gather_rows(v, perm), ops::gather_rows(a, perm), 0.2,
                                           ContrastiveDirection::kVisualToAudio).item();
  EXPECT_NEAR(permuted, base, 1e-12);
}

TEST(ContrastiveTest, Errors) {
  const Tensor ok = random_tensor({3, 4}, 1, false);
  EXPECT_THROW(contrastive_loss(ok, ok, 0.0, ContrastiveDirection::kSymmetric), ParameterError);
  EXPECT_THROW(contrastive_loss(Tensor({1, 4}, {1, 2, 3, 4}), Tensor({1, 4}, {1, 2, 3, 4}), 0.1,
                                ContrastiveDirection::kSymmetric),
               InputError);
  EXPECT_THROW(contrastive_loss(Tensor({2, 2}, {1, 0, 0, 0}), Tensor({2, 2}, {1, 0, 0, 1}), 0.1,
                                ContrastiveDirection::kSymmetric),
               NumericError);
  EXPECT_THROW(contrastive_loss(ok, random_tensor({3, 5}, 2, false), 0.1, ContrastiveDirection::kSymmetric),
               ShapeError);
}

TEST(ContrastiveTest, DescentAlignsPositivesAndSeparatesNegatives) {
  Tensor v = random_tensor({3, 2}, 5), a = random_tensor({3, 2}, 6);
  auto sims = [&] {
    NoGradGuard guard;
    return ops::matmul(ops::l2_normalize_rows(v), ops::transpose(ops::l2_normalize_rows(a)));
  };
  const Tensor before = sims();
  for (int it = 0; it < 400; ++it) {
    v.zero_grad();
    a.zero_grad();
    contrastive_loss(v, a, 0.5, ContrastiveDirection::kSymmetric).backward();
    for (Tensor* t : {&v, &a}) {
      auto d = t->mutable_data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= 0.1 * t->grad()[i];
    }
  }
  const Tensor after = sims();
  double diag_before = 0, diag_after = 0, off_before = 0, off_after = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      (i == j ? diag_before : off_before) += before.at(i, j);
      (i == j ? diag_after : off_after) += after.at(i, j);
    }
  }
  EXPECT_GT(diag_after, diag_before);
  EXPECT_LT(off_after, off_before);
  EXPECT_GT(diag_after / 3.0, 0.99);
}

TEST(ReconstructionTest, ExactPredictionIsZero) {
  const Tensor t = random_tensor({4, 6}, 1, false);
  const auto r = reconstruction_loss(t, t, t, t, 2, ReconNormalization::kPerElement);
  EXPECT_EQ(r.total.item(), 0.0);
}

TEST(ReconstructionTest, ZeroOnlyWhenEveryPatchMatches) {
  const Tensor t = random_tensor({4, 6}, 1, false);
  std::vector<double> off(t.data().begin(), t.data().end());
  off[17] += 1e-5;
  const auto r = reconstruction_loss(t, t, Tensor({4, 6}, off), t, 2, ReconNormalization::kPerElement);
  EXPECT_GT(r.total.item(), 0.0);
}

TEST(ReconstructionTest, UnitOffsetGivesOneUnderElementMean) {
  const Tensor target = random_tensor({1, 256}, 2, false);
  const Tensor pred = ops::add(target, Tensor::full({1, 256}, 1.0));
  const auto r = reconstruction_loss(pred, target, Tensor(), Tensor(), 1, ReconNormalization::kPerElement);
  EXPECT_NEAR(r.audio.item(), 1.0, 1e-12);
  EXPECT_EQ(r.visual.item(), 0.0);
  const auto p = reconstruction_loss(pred, target, Tensor(), Tensor(), 1, ReconNormalization::kPerPatch);
  EXPECT_NEAR(p.audio.item(), 256.0, 1e-9);
}

TEST(ReconstructionTest, DoublingResidualQuadruples) {
  const Tensor target = random_tensor({6, 5}, 3, false), d = random_tensor({6, 5}, 4, false);
  const double one = reconstruction_loss(ops::add(target, d), target, Tensor(), Tensor(), 3,
                                         ReconNormalization::kPerElement).total.item();
  const double two = reconstruction_loss(ops::add(target, ops::scale(d, 2.0)), target, Tensor(),
                                         Tensor(), 3, ReconNormalization::kPerElement).total.item();
  EXPECT_NEAR(two, 4.0 * one, 1e-12);
}

TEST(ReconstructionTest, AveragesPerSampleMeans) {
  // Sample 0 has error 1 everywhere, sample 1 error 3: mean of 1 and 9.
  const Tensor target = Tensor::zeros({4, 2});
  const Tensor pred({4, 2}, {1, 1, 1, 1, 3, 3, 3, 3});
  const auto r = reconstruction_loss(Tensor(), Tensor(), pred, target, 2, ReconNormalization::kPerElement);
  EXPECT_NEAR(r.visual.item(), 5.0, 1e-12);
}

TEST(ReconstructionTest, CountMismatchIsShapeError) {
  EXPECT_THROW(reconstruction_loss(Tensor::zeros({3, 4}), Tensor::zeros({2, 4}), Tensor(), Tensor(), 1,
                                   ReconNormalization::kPerElement),
               ShapeError);
  EXPECT_THROW(reconstruction_loss(Tensor::zeros({3, 4}), Tensor(), Tensor(), Tensor(), 1,
                                   ReconNormalization::kPerElement),
               ShapeError);
}

TEST(TotalLossTest, Examples) {
  const Tensor lc = Tensor::scalar(0.5), lr = Tensor::scalar(0.2);
  EXPECT_NEAR(total_loss(lc, lr, {0.1, 1.0}).item(), 0.25, 1e-15);
  EXPECT_EQ(total_loss(lc, lr, {0.0, 1.0}).item(), 0.2);
  EXPECT_NEAR(total_loss(lc, lr, {0.3, 2.0}).item(), 3.0 * total_loss(lc, lr, {0.1, 2.0 / 3.0}).item(),
              1e-12);
  EXPECT_THROW(total_loss(lc, lr, {-0.1, 1.0}), ParameterError);
}

TEST(DirectionTest, NamesRoundTrip) {
  for (auto d : {ContrastiveDirection::kVisualToAudio, ContrastiveDirection::kAudioToVisual,
                 ContrastiveDirection::kSymmetric}) {
    EXPECT_EQ(parse_direction(direction_name(d)), d);
  }
  EXPECT_THROW(parse_direction("both"), ConfigError);
}

TEST(ScheduleTest, WarmupThenCosine) {
  EXPECT_DOUBLE_EQ(cosine_lr(1.0, 0, 10, 100), 0.1);
  EXPECT_DOUBLE_EQ(cosine_lr(1.0, 9, 10, 100), 1.0);
  EXPECT_DOUBLE_EQ(cosine_lr(1.0, 10, 10, 100), 1.0);
  EXPECT_NEAR(cosine_lr(1.0, 55, 10, 100), 0.5, 1e-12);
  EXPECT_NEAR(cosine_lr(1.0, 100, 10, 100), 0.0, 1e-12);
  for (std::size_t s = 11; s < 100; ++s) EXPECT_LE(cosine_lr(1.0, s, 10, 100), cosine_lr(1.0, s - 1, 10, 100));
}

TEST(AdamWTest, FirstStepMovesBySignTimesRate) {
  Tensor w({3}, {1.0, -2.0, 0.5}, true);
  ops::sum(ops::mul(w, Tensor({3}, {2.0, -3.0, 0.0}))).backward();
  OptimizerConfig cfg;
  cfg.weight_decay = 0.0;
  AdamW opt({{"w", "g", w}}, cfg);
  opt.step(0.1);
  EXPECT_NEAR(w[0], 0.9, 1e-6);
  EXPECT_NEAR(w[1], -1.9, 1e-6);
  EXPECT_EQ(w[2], 0.5);
  EXPECT_EQ(opt.steps_taken(), 1u);
}

class TrainStepTest : public ::testing::Test {
 protected:
  void SetUp() override {
    model = ModelConfig::toy();
    model.dim = 16;
    model.heads = 2;
    model.decoder_dim = 8;
    model.decoder_heads = 2;
    model.num_registers = 2;
    model.mel_bins = 32;
    model.audio_window = 32;
    model.frame_size = 32;
    std::mt19937_64 rng(1);
    std::normal_distribution<float> n;
    for (std::size_t b = 0; b < 4; ++b) {
      FrameWindowSample s;
      s.frame = {{3, 32, 32}, std::vector<float>(3 * 32 * 32)};
      s.window = {{32, 32}, std::vector<float>(32 * 32)};
      for (float& v : s.frame.data) v = n(rng);
      for (float& v : s.window.data) v = n(rng);
      batch.push_back(s);
    }
  }
  ModelConfig model;
  std::vector<FrameWindowSample> batch;
};

TEST_F(TrainStepTest, ZeroLearningRateChangesNothing) {
  ModelState state = ModelState::init(model, 0);
  AdamW opt(state.parameters(), OptimizerConfig{});
  const ObjectiveConfig cfg;
  std::vector<std::vector<double>> before;
  for (const auto& p : state.parameters()) before.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  std::mt19937_64 r1(4), r2(4);
  const LossReport a = train_step(batch, state, opt, cfg, 0.0, r1);
  const LossReport b = train_step(batch, state, opt, cfg, 0.0, r2);
  EXPECT_EQ(a.total, b.total);
  EXPECT_EQ(a.contrastive, b.contrastive);
  EXPECT_EQ(a.reconstruction, b.reconstruction);
  const auto after = state.parameters();
  for (std::size_t i = 0; i < after.size(); ++i) {
    EXPECT_EQ(before[i], std::vector<double>(after[i].tensor.data().begin(), after[i].tensor.data().end()));
  }
}

TEST_F(TrainStepTest, ReportSatisfiesTotalIdentity) {
  ModelState state = ModelState::init(model, 0);
  AdamW opt(state.parameters(), OptimizerConfig{});
  ObjectiveConfig cfg;
  cfg.weights = {0.3, 0.7};
  std::mt19937_64 rng(2);
  const LossReport r = train_step(batch, state, opt, cfg, 1e-3, rng);
  EXPECT_NEAR(r.total, 0.3 * r.contrastive + 0.7 * r.reconstruction, 1e-12);
  EXPECT_NEAR(r.reconstruction, r.recon_audio + r.recon_visual, 1e-12);
  EXPECT_GE(r.contrastive, 0.0);
  EXPECT_GE(r.recon_audio, 0.0);
}

TEST_F(TrainStepTest, GradientsFiniteForEveryGroup) {
  ModelState state = ModelState::init(model, 0);
  std::mt19937_64 rng(3);
  compute_losses(batch, state, ObjectiveConfig{}, rng).total.backward();
  for (const auto& p : state.parameters()) {
    ASSERT_TRUE(p.tensor.has_grad()) << p.name;
    for (double g : p.tensor.grad()) ASSERT_TRUE(std::isfinite(g)) << p.name;
  }
}

TEST_F(TrainStepTest, RepeatedStepsReduceLoss) {
  ModelState state = ModelState::init(model, 0);
  AdamW opt(state.parameters(), OptimizerConfig{});
  const ObjectiveConfig cfg;
  double first = 0.0, last = 0.0;
  for (int s = 0; s < 30; ++s) {
    std::mt19937_64 step_rng(5);
    const double t = train_step(batch, state, opt, cfg, 3e-3, step_rng).total;
    if (s == 0) first = t;
    last = t;
  }
  EXPECT_LT(last, first);
}

TEST_F(TrainStepTest, SingleSampleBatchIsInputError) {
  ModelState state = ModelState::init(model, 0);
  AdamW opt(state.parameters(), OptimizerConfig{});
  std::mt19937_64 rng(0);
  EXPECT_THROW(train_step({batch[0]}, state, opt, ObjectiveConfig{}, 1e-3, rng), InputError);
}

}  // namespace
}  // namespace cavsync
