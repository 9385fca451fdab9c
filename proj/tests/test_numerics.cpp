// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cavsync/model/layers.hpp"
#include "cavsync/numerics/attention.hpp"
#include "cavsync/numerics/cavt.hpp"
#include "cavsync/numerics/finite_diff.hpp"
#include "cavsync/numerics/ops.hpp"
#include "test_util.hpp"

namespace cavsync {
namespace {

using testing::grad_error;
using testing::random_tensor;
using Inputs = std::vector<Tensor>;

TEST(TensorTest, RejectsInconsistentShape) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  EXPECT_THROW(Tensor::zeros({0, 3}), ShapeError);
}

TEST(TensorTest, GradientHasValueShape) {
  Tensor x = random_tensor({3, 4}, 1);
  ops::sum_squares(x).backward();
  EXPECT_EQ(x.grad().size(), x.numel());
}

TEST(TensorTest, BackwardNeedsScalar) {
  Tensor x = random_tensor({2, 2}, 1);
  EXPECT_THROW(ops::scale(x, 2.0).backward(), ShapeError);
}

TEST(TensorTest, MutableDataOnlyOnLeaves) {
  Tensor x = random_tensor({2, 2}, 1);
  Tensor y = ops::scale(x, 2.0);
  EXPECT_THROW(y.mutable_data(), ContractError);
  EXPECT_NO_THROW(x.mutable_data());
}

TEST(MatmulTest, IdentityLeavesOperandUnchanged) {
  const Tensor I({2, 2}, {1, 0, 0, 1});
  const Tensor B({2, 2}, {2, 3, 4, 5});
  const Tensor C = ops::matmul(I, B);
  EXPECT_EQ(std::vector<double>(C.data().begin(), C.data().end()),
            (std::vector<double>{2, 3, 4, 5}));
}

TEST(MatmulTest, RowTimesColumn) {
  const Tensor C = ops::matmul(Tensor({1, 2}, {1, 2}), Tensor({2, 1}, {3, 4}));
  EXPECT_EQ(C.shape(), (Shape{1, 1}));
  EXPECT_DOUBLE_EQ(C.item(), 11.0);
}

TEST(MatmulTest, MismatchNamesBothShapes) {
  try {
    ops::matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x2]"), std::string::npos) << msg;
  }
}

TEST(MatmulTest, GradientOfSumMatchesFiniteDifferences) {
  Tensor a = random_tensor({3, 4}, 2), b = random_tensor({4, 2}, 3);
  ops::sum(ops::matmul(a, b)).backward();
  const Tensor na = finite_diff_grad([&](const Tensor& x) { return ops::sum(ops::matmul(x, b)).item(); }, a);
  const Tensor nb = finite_diff_grad([&](const Tensor& x) { return ops::sum(ops::matmul(a, x)).item(); }, b);
  EXPECT_LT(max_relative_error(a.grad(), na.data()), 1e-6);
  EXPECT_LT(max_relative_error(b.grad(), nb.data()), 1e-6);
}

TEST(LayerNormTest, ConstantRowMapsToZero) {
  const Tensor x({1, 4}, {3, 3, 3, 3});
  const Tensor y = ops::layer_norm(x, Tensor::full({4}, 1.0), Tensor::zeros({4}), 1e-6);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNormTest, TwoElementRowIsSymmetric) {
  const Tensor y =
      ops::layer_norm(Tensor({1, 2}, {1, 3}), Tensor::full({2}, 1.0), Tensor::zeros({2}), 1e-12);
  EXPECT_NEAR(y[0], -1.0, 1e-9);
  EXPECT_NEAR(y[1], 1.0, 1e-9);
}

TEST(LayerNormTest, RowsHaveZeroMeanUnitVariance) {
  const Tensor y = ops::layer_norm(random_tensor({5, 16}, 4), Tensor::full({16}, 1.0),
                                   Tensor::zeros({16}), 1e-12);
  for (std::size_t r = 0; r < 5; ++r) {
    double m = 0.0, v = 0.0;
    for (std::size_t c = 0; c < 16; ++c) m += y.at(r, c) / 16.0;
    for (std::size_t c = 0; c < 16; ++c) v += (y.at(r, c) - m) * (y.at(r, c) - m) / 16.0;
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-9);
  }
}

TEST(LayerNormTest, RejectsNonPositiveEps) {
  const Tensor x = random_tensor({2, 4}, 1);
  EXPECT_THROW(ops::layer_norm(x, Tensor::full({4}, 1.0), Tensor::zeros({4}), 0.0),
               ParameterError);
  EXPECT_THROW(ops::layer_norm(x, Tensor::full({4}, 1.0), Tensor::zeros({4}), -1e-6),
               ParameterError);
}

TEST(LayerNormTest, GradientMatchesFiniteDifferences) {
  const double err = grad_error(
      [](const Inputs& in) { return ops::layer_norm(in[0], in[1], in[2], 1e-6); },
      {random_tensor({2, 8}, 5), random_tensor({8}, 6), random_tensor({8}, 7)});
  EXPECT_LT(err, 1e-5);
}

TEST(SoftmaxTest, UniformRow) {
  const Tensor p = ops::softmax_rows(Tensor({1, 4}, {0.3, 0.3, 0.3, 0.3}), 1.0);
  for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(SoftmaxTest, ClosedFormTwoEntries) {
  const Tensor p = ops::softmax_rows(Tensor({1, 2}, {std::log(2.0), 0.0}), 1.0);
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
}

TEST(SoftmaxTest, RowsSumToOne) {
  const Tensor p = ops::softmax_rows(random_tensor({20, 7}, 8, false, 5.0), 0.3);
  for (std::size_t r = 0; r < 20; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 7; ++c) s += p.at(r, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(SoftmaxTest, MonotoneInInputs) {
  const Tensor p = ops::softmax_rows(Tensor({1, 3}, {0.1, 0.5, 0.2}), 0.7);
  EXPECT_LT(p[0], p[2]);
  EXPECT_LT(p[2], p[1]);
}

TEST(SoftmaxTest, RejectsNonPositiveTemperature) {
  const Tensor x = random_tensor({2, 3}, 1);
  EXPECT_THROW(ops::softmax_rows(x, 0.0), ParameterError);
  EXPECT_THROW(ops::log_softmax_rows(x, -1.0), ParameterError);
}

TEST(FiniteDiffTest, SquareAtThree) {
  const Tensor g = finite_diff_grad(
      [](const Tensor& x) { return x[0] * x[0]; }, Tensor({1}, {3.0}), 1e-5);
  EXPECT_NEAR(g[0], 6.0, 1e-6);
}

TEST(FiniteDiffTest, SumGivesOnes) {
  const Tensor g = finite_diff_grad([](const Tensor& x) { return ops::sum(x).item(); },
                                    random_tensor({3, 3}, 9, false));
  for (double v : g.data()) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(FiniteDiffTest, RejectsNonPositiveStep) {
  EXPECT_THROW(finite_diff_grad([](const Tensor&) { return 0.0; }, Tensor({1}, {1.0}), 0.0),
               ParameterError);
}

struct PrimitiveCase {
  const char* name;
  std::function<Tensor(const Inputs&)> f;
  std::vector<Shape> shapes;
};

class PrimitiveGradientTest : public ::testing::TestWithParam<PrimitiveCase> {};

TEST_P(PrimitiveGradientTest, ReverseModeMatchesFiniteDifferences) {
  const PrimitiveCase& c = GetParam();
  Inputs in;
  for (std::size_t i = 0; i < c.shapes.size(); ++i) in.push_back(random_tensor(c.shapes[i], 10 + i));
  EXPECT_LT(grad_error(c.f, in), 1e-4) << c.name;
}

const std::vector<std::size_t> kGatherIndex{2, 0, 2, 1};

INSTANTIATE_TEST_SUITE_P(
    AllPrimitives, PrimitiveGradientTest,
    ::testing::Values(
        PrimitiveCase{"add", [](const Inputs& x) { return ops::add(x[0], x[1]); }, {{3, 4}, {3, 4}}},
        PrimitiveCase{"sub", [](const Inputs& x) { return ops::sub(x[0], x[1]); }, {{3, 4}, {3, 4}}},
        PrimitiveCase{"mul", [](const Inputs& x) { return ops::mul(x[0], x[1]); }, {{3, 4}, {3, 4}}},
        PrimitiveCase{"add_row", [](const Inputs& x) { return ops::add_row(x[0], x[1]); }, {{3, 4}, {4}}},
        PrimitiveCase{"scale", [](const Inputs& x) { return ops::scale(x[0], -1.7); }, {{3, 4}}},
        PrimitiveCase{"linear", [](const Inputs& x) { return ops::linear(x[0], x[1], x[2]); },
                      {{3, 4}, {4, 5}, {5}}},
        PrimitiveCase{"gelu", [](const Inputs& x) { return ops::gelu(x[0]); }, {{4, 5}}},
        PrimitiveCase{"softmax", [](const Inputs& x) { return ops::softmax_rows(x[0], 0.5); }, {{3, 5}}},
        PrimitiveCase{"log_softmax", [](const Inputs& x) { return ops::log_softmax_rows(x[0], 0.7); },
                      {{3, 5}}},
        PrimitiveCase{"sum", [](const Inputs& x) { return ops::sum(x[0]); }, {{3, 4}}},
        PrimitiveCase{"mean", [](const Inputs& x) { return ops::mean(x[0]); }, {{3, 4}}},
        PrimitiveCase{"sum_squares", [](const Inputs& x) { return ops::sum_squares(x[0]); }, {{3, 4}}},
        PrimitiveCase{"mean_rows", [](const Inputs& x) { return ops::mean_rows(x[0]); }, {{3, 4}}},
        PrimitiveCase{"variance_rows", [](const Inputs& x) { return ops::variance_rows(x[0]); }, {{3, 6}}},
        PrimitiveCase{"transpose", [](const Inputs& x) { return ops::transpose(x[0]); }, {{3, 4}}},
        PrimitiveCase{"reshape", [](const Inputs& x) { return ops::reshape(x[0], {6, 2}); }, {{3, 4}}},
        PrimitiveCase{"concat_rows", [](const Inputs& x) { return ops::concat_rows({x[0], x[1]}); },
                      {{2, 3}, {4, 3}}},
        PrimitiveCase{"concat_cols", [](const Inputs& x) { return ops::concat_cols({x[0], x[1]}); },
                      {{3, 2}, {3, 4}}},
        PrimitiveCase{"slice_rows", [](const Inputs& x) { return ops::slice_rows(x[0], 1, 3); }, {{4, 3}}},
        PrimitiveCase{"slice_cols", [](const Inputs& x) { return ops::slice_cols(x[0], 1, 3); }, {{3, 4}}},
        PrimitiveCase{"gather_rows", [](const Inputs& x) { return ops::gather_rows(x[0], kGatherIndex); },
                      {{3, 4}}},
        PrimitiveCase{"l2_normalize", [](const Inputs& x) { return ops::l2_normalize_rows(x[0]); }, {{3, 4}}},
        PrimitiveCase{"diagonal", [](const Inputs& x) { return ops::diagonal(x[0]); }, {{4, 4}}},
        PrimitiveCase{"bce", [](const Inputs& x) { return ops::bce_with_logits(x[0], x[1]); },
                      {{3, 4}, {3, 4}}},
        PrimitiveCase{"segment_mean", [](const Inputs& x) { return ops::segment_mean_rows(x[0], 4, 1, 3); },
                      {{8, 3}}},
        PrimitiveCase{"attention",
                      [](const Inputs& x) { return ops::attention(x[0], x[1], x[2], 2, 3); },
                      {{6, 4}, {6, 4}, {6, 4}}}),
    [](const ::testing::TestParamInfo<PrimitiveCase>& info) { return std::string(info.param.name); });

TEST(BlockTest, TransformerBlockGradientMatchesFiniteDifferences) {
  InitRng rng(3);
  TransformerBlock block = TransformerBlock::init(8, 2, 16, 1e-6, rng);
  Tensor x = random_tensor({6, 8}, 12);
  ParamList params;
  block.collect(params, "block", "block");
  const Tensor w = random_tensor({6, 8}, 13, false);
  auto loss = [&] { return ops::sum(ops::mul(block(x, 3), w)); };
  loss().backward();
  NoGradGuard guard;
  for (auto& p : params) {
    const auto numeric = finite_diff_inplace([&] { return loss().item(); }, p.tensor);
    std::vector<double> analytic(p.tensor.numel(), 0.0);
    if (p.tensor.has_grad()) analytic.assign(p.tensor.grad().begin(), p.tensor.grad().end());
    EXPECT_LT(max_relative_error(analytic, numeric, 1e-6), 1e-4) << p.name;
  }
  const auto nx = finite_diff_inplace([&] { return loss().item(); }, x);
  EXPECT_LT(max_relative_error(x.grad(), nx, 1e-6), 1e-4);
}

TEST(AttentionTest, SequencesDoNotInteract) {
  Tensor q = random_tensor({6, 4}, 1), k = random_tensor({6, 4}, 2), v = random_tensor({6, 4}, 3);
  const Tensor a = ops::attention(q, k, v, 2, 3);
  auto vv = v.mutable_data();
  for (std::size_t i = 12; i < 24; ++i) vv[i] += 5.0;
  const Tensor b = ops::attention(q, k, v, 2, 3);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_NE(a[12], b[12]);
}

TEST(GraphTest, GradientsAccumulateOverConsumers) {
  Tensor x = random_tensor({2, 3}, 1);
  ops::sum(ops::add(ops::scale(x, 2.0), ops::mul(x, x))).backward();
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(x.grad()[i], 2.0 + 2.0 * x[i], 1e-12);
}

TEST(GraphTest, LeafGradientsAccumulateAcrossBackwardCalls) {
  Tensor x = random_tensor({2, 2}, 1);
  ops::sum(x).backward();
  ops::sum(x).backward();
  for (double g : x.grad()) EXPECT_EQ(g, 2.0);
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(GraphTest, DiamondVisitsEachNodeOnce) {
  Tensor x = random_tensor({1, 3}, 2);
  const Tensor h = ops::scale(x, 3.0);
  ops::sum(ops::add(h, h)).backward();
  for (double g : x.grad()) EXPECT_DOUBLE_EQ(g, 6.0);
}

TEST(GraphTest, ForwardIsPure) {
  const Tensor x = random_tensor({4, 8}, 3), w = random_tensor({8, 8}, 4), b = random_tensor({8}, 5);
  const Tensor y1 = ops::gelu(ops::linear(x, w, b));
  const Tensor y2 = ops::gelu(ops::linear(x, w, b));
  for (std::size_t i = 0; i < y1.numel(); ++i) EXPECT_EQ(y1[i], y2[i]);
}

TEST(GraphTest, NoGradGuardRecordsNothing) {
  Tensor x = random_tensor({2, 2}, 1);
  Tensor y;
  {
    NoGradGuard guard;
    y = ops::scale(x, 2.0);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(ops::scale(x, 2.0).requires_grad());
}

TEST(OpsTest, ZeroNormRowIsNumericError) {
  EXPECT_THROW(ops::l2_normalize_rows(Tensor({2, 2}, {1, 0, 0, 0})), NumericError);
}

TEST(OpsTest, ConcatAndSliceShapeErrors) {
  EXPECT_THROW(ops::concat_rows({Tensor::zeros({2, 3}), Tensor::zeros({2, 4})}), ShapeError);
  EXPECT_THROW(ops::slice_rows(Tensor::zeros({2, 3}), 1, 3), ShapeError);
  const std::vector<std::size_t> bad{5};
  EXPECT_THROW(ops::gather_rows(Tensor::zeros({2, 3}), bad), ShapeError);
}

TEST(CavtTest, GoldenBytes) {
  const FloatArray a{{2, 1}, {1.0f, -2.0f}};
  const std::string expected("CAVT"
                             "\x02\x00\x00\x00"
                             "\x02\x00\x00\x00"
                             "\x01\x00\x00\x00"
                             "\x00\x00\x80\x3f"
                             "\x00\x00\x00\xc0",
                             24);
  EXPECT_EQ(encode_cavt(a), expected);
  EXPECT_EQ(decode_cavt(expected), a);
}

TEST(CavtTest, RoundTripIsBitExact) {
  std::mt19937 rng(4);
  std::normal_distribution<float> n;
  FloatArray a{{3, 5, 7}, std::vector<float>(105)};
  for (float& v : a.data) v = n(rng);
  a.data[0] = -0.0f;
  EXPECT_EQ(decode_cavt(encode_cavt(a)), a);
  const auto path = std::filesystem::temp_directory_path() / "cavsync_roundtrip.cavt";
  write_cavt(path, a);
  const FloatArray b = read_cavt(path);
  EXPECT_EQ(b, a);
  EXPECT_TRUE(std::signbit(b.data[0]));
  std::filesystem::remove(path);
}

TEST(CavtTest, RejectsCorruptInput) {
  const std::string good = encode_cavt({{2}, {1.0f, 2.0f}});
  EXPECT_THROW(decode_cavt("CAVX" + good.substr(4)), LoadError);
  EXPECT_THROW(decode_cavt(good.substr(0, 6)), LoadError);
  EXPECT_THROW(decode_cavt(good.substr(0, good.size() - 1)), LoadError);
  EXPECT_THROW(decode_cavt(good + "x"), LoadError);
  EXPECT_THROW(read_cavt("/nonexistent/file.cavt"), LoadError);
}

}  // namespace
}  // namespace cavsync
