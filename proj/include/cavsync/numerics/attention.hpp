// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_NUMERICS_ATTENTION_HPP_
#define CAVSYNC_NUMERICS_ATTENTION_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cavsync/errors.hpp"
#include "cavsync/numerics/kernels.hpp"
#include "cavsync/numerics/tensor.hpp"

namespace cavsync::ops {

/// Multi-head scaled dot-product attention over a stack of equal-length
/// sequences.
///
/// q, k and v are [batch * seq_len, dim]; each block of `seq_len` rows is an
/// independent sequence and attention never crosses blocks. Head h uses
/// columns [h * dim / heads, (h + 1) * dim / heads).
inline Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                        std::size_t seq_len) {
  if (q.shape() != k.shape() || q.shape() != v.shape() || q.rank() != 2) {
    throw ShapeError("attention: q/k/v shapes " + shape_str(q.shape()) + ", " +
                     shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  const std::size_t rows = q.rows(), dim = q.cols();
  if (heads == 0 || dim % heads != 0) {
    throw ShapeError("attention: width " + std::to_string(dim) + " not divisible into " +
                     std::to_string(heads) + " heads");
  }
  if (seq_len == 0 || rows % seq_len != 0) {
    throw ShapeError("attention: " + std::to_string(rows) + " rows is not a whole number of " +
                     std::to_string(seq_len) + "-token sequences");
  }
  const std::size_t batch = rows / seq_len, hd = dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(double(hd));
  const std::size_t block = seq_len * seq_len;
  std::vector<double> probs(batch * heads * block);
  std::vector<double> out(rows * dim, 0.0);
  const double* qd = q.data().data();
  const double* kd = k.data().data();
  const double* vd = v.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      double* p = probs.data() + (b * heads + h) * block;
      const std::size_t off = b * seq_len * dim + h * hd;
      kernels::gemm(false, true, seq_len, seq_len, hd, qd + off, dim, kd + off, dim, p, seq_len,
                    false);
      for (std::size_t i = 0; i < seq_len; ++i) {
        double* row = p + i * seq_len;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < seq_len; ++j) {
          row[j] *= inv_sqrt;
          mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < seq_len; ++j) {
          row[j] = std::exp(row[j] - mx);
          z += row[j];
        }
        for (std::size_t j = 0; j < seq_len; ++j) row[j] /= z;
      }
      kernels::gemm(false, false, seq_len, hd, seq_len, p, seq_len, vd + off, dim,
                    out.data() + off, dim, false);
    }
  }
  return Tensor::make_result(
      {rows, dim}, std::move(out), {q, k, v},
      [batch, heads, seq_len, dim, hd, inv_sqrt, block,
       probs = std::move(probs)](cavsync::detail::Node& node) {
        const auto& qv = Tensor::parent_value(node, 0);
        const auto& kv = Tensor::parent_value(node, 1);
        const auto& vv = Tensor::parent_value(node, 2);
        double* gq = Tensor::parent_grad(node, 0);
        double* gk = Tensor::parent_grad(node, 1);
        double* gv = Tensor::parent_grad(node, 2);
        const double* g = node.grad.data();
        std::vector<double> dp(block);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            const double* p = probs.data() + (b * heads + h) * block;
            const std::size_t off = b * seq_len * dim + h * hd;
            if (gv) {
              kernels::gemm(true, false, seq_len, hd, seq_len, p, seq_len, g + off, dim, gv + off,
                            dim, true);
            }
            if (!gq && !gk) continue;
            // dP = dO V^T, then dS = P * (dP - rowsum(dP * P)) scaled by 1/sqrt(hd).
            kernels::gemm(false, true, seq_len, seq_len, hd, g + off, dim, vv.data() + off, dim,
                          dp.data(), seq_len, false);
            for (std::size_t i = 0; i < seq_len; ++i) {
              double dot = 0.0;
              for (std::size_t j = 0; j < seq_len; ++j) {
                dot += dp[i * seq_len + j] * p[i * seq_len + j];
              }
              for (std::size_t j = 0; j < seq_len; ++j) {
                dp[i * seq_len + j] = p[i * seq_len + j] * (dp[i * seq_len + j] - dot) * inv_sqrt;
              }
            }
            if (gq) {
              kernels::gemm(false, false, seq_len, hd, seq_len, dp.data(), seq_len,
                            kv.data() + off, dim, gq + off, dim, true);
            }
            if (gk) {
              kernels::gemm(true, false, seq_len, hd, seq_len, dp.data(), seq_len,
                            qv.data() + off, dim, gk + off, dim, true);
            }
          }
        }
      },
      "attention");
}

}  // namespace cavsync::ops

#endif  // CAVSYNC_NUMERICS_ATTENTION_HPP_
