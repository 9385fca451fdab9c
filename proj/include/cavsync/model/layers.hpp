// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_MODEL_LAYERS_HPP_
#define CAVSYNC_MODEL_LAYERS_HPP_

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "cavsync/numerics/attention.hpp"
#include "cavsync/numerics/ops.hpp"
#include "cavsync/numerics/tensor.hpp"

namespace cavsync {

/// Named handle to a trainable leaf. `group` is the unit gradient checks and
/// reports aggregate over.
struct ParamEntry {
  std::string name;
  std::string group;
  Tensor tensor;
};

using ParamList = std::vector<ParamEntry>;

using InitRng = std::mt19937_64;

inline Tensor normal_param(Shape shape, double stddev, InitRng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(std::move(shape), std::move(v), true);
}

inline Tensor xavier_param(std::size_t in, std::size_t out, InitRng& rng) {
  const double bound = std::sqrt(6.0 / double(in + out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(in * out);
  for (auto& x : v) x = dist(rng);
  return Tensor({in, out}, std::move(v), true);
}

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static Linear init(std::size_t in, std::size_t out, InitRng& rng) {
    return {xavier_param(in, out, rng), Tensor::zeros({out}, true)};
  }
  Tensor operator()(const Tensor& x) const { return ops::linear(x, weight, bias); }
  void collect(ParamList& out, const std::string& name, const std::string& group) const {
    out.push_back({name + ".weight", group, weight});
    out.push_back({name + ".bias", group, bias});
  }
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;
  double eps = 1e-6;

  static LayerNorm init(std::size_t dim, double eps) {
    return {Tensor::full({dim}, 1.0, true), Tensor::zeros({dim}, true), eps};
  }
  Tensor operator()(const Tensor& x) const { return ops::layer_norm(x, gain, bias, eps); }
  void collect(ParamList& out, const std::string& name, const std::string& group) const {
    out.push_back({name + ".gain", group, gain});
    out.push_back({name + ".bias", group, bias});
  }
};

/// Attention and MLP weights of a pre-norm transformer block.
struct BlockWeights {
  Linear query, key, value, proj;
  Linear fc1, fc2;
  std::size_t heads = 1;

  static BlockWeights init(std::size_t dim, std::size_t heads, std::size_t hidden,
                           InitRng& rng) {
    BlockWeights w;
    w.query = Linear::init(dim, dim, rng);
    w.key = Linear::init(dim, dim, rng);
    w.value = Linear::init(dim, dim, rng);
    w.proj = Linear::init(dim, dim, rng);
    w.fc1 = Linear::init(dim, hidden, rng);
    w.fc2 = Linear::init(hidden, dim, rng);
    w.heads = heads;
    return w;
  }
  void collect(ParamList& out, const std::string& name, const std::string& group) const {
    query.collect(out, name + ".attn.query", group);
    key.collect(out, name + ".attn.key", group);
    value.collect(out, name + ".attn.value", group);
    proj.collect(out, name + ".attn.proj", group);
    fc1.collect(out, name + ".mlp.fc1", group);
    fc2.collect(out, name + ".mlp.fc2", group);
  }
};

struct BlockNorms {
  LayerNorm pre_attn, pre_mlp;

  static BlockNorms init(std::size_t dim, double eps) {
    return {LayerNorm::init(dim, eps), LayerNorm::init(dim, eps)};
  }
  void collect(ParamList& out, const std::string& name, const std::string& group) const {
    pre_attn.collect(out, name + ".norm1", group);
    pre_mlp.collect(out, name + ".norm2", group);
  }
};

/// x + attn(norm1(x)), then + mlp(norm2(.)). Rows of x are stacked
/// sequences of `seq_len` tokens each.
inline Tensor block_forward(const Tensor& x, const BlockWeights& w, const BlockNorms& n,
                            std::size_t seq_len) {
  const Tensor h = n.pre_attn(x);
  const Tensor attn = ops::attention(w.query(h), w.key(h), w.value(h), w.heads, seq_len);
  const Tensor x1 = ops::add(x, w.proj(attn));
  const Tensor m = w.fc2(ops::gelu(w.fc1(n.pre_mlp(x1))));
  return ops::add(x1, m);
}

struct TransformerBlock {
  BlockWeights weights;
  BlockNorms norms;

  static TransformerBlock init(std::size_t dim, std::size_t heads, std::size_t hidden,
                               double eps, InitRng& rng) {
    return {BlockWeights::init(dim, heads, hidden, rng), BlockNorms::init(dim, eps)};
  }
  Tensor operator()(const Tensor& x, std::size_t seq_len) const {
    return block_forward(x, weights, norms, seq_len);
  }
  void collect(ParamList& out, const std::string& name, const std::string& group) const {
    weights.collect(out, name, group);
    norms.collect(out, name, group);
  }
};

/// Fixed 2-D sine-cosine position codes, one row per grid cell in raster
/// order. Half the width encodes the row index, half the column index.
inline Tensor sincos_2d(std::size_t dim, std::size_t rows, std::size_t cols) {
  if (dim % 4 != 0) throw ShapeError("sincos_2d: width must be a multiple of 4");
  const std::size_t quarter = dim / 4;
  std::vector<double> table(rows * cols * dim);
  auto encode = [&](double pos, double* out) {
    for (std::size_t i = 0; i < quarter; ++i) {
      const double omega = 1.0 / std::pow(10000.0, double(i) / double(quarter));
      out[i] = std::sin(pos * omega);
      out[quarter + i] = std::cos(pos * omega);
    }
  };
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double* row = table.data() + (r * cols + c) * dim;
      encode(double(r), row);
      encode(double(c), row + 2 * quarter);
    }
  }
  return Tensor({rows * cols, dim}, std::move(table));
}

/// Fixed 1-D sine-cosine codes for `length` positions.
inline Tensor sincos_1d(std::size_t dim, std::size_t length) {
  if (dim % 2 != 0) throw ShapeError("sincos_1d: width must be even");
  const std::size_t half = dim / 2;
  std::vector<double> table(length * dim);
  for (std::size_t p = 0; p < length; ++p) {
    for (std::size_t i = 0; i < half; ++i) {
      const double omega = 1.0 / std::pow(10000.0, double(i) / double(half));
      table[p * dim + i] = std::sin(double(p) * omega);
      table[p * dim + half + i] = std::cos(double(p) * omega);
    }
  }
  return Tensor({length, dim}, std::move(table));
}

}  // namespace cavsync

#endif  // CAVSYNC_MODEL_LAYERS_HPP_
