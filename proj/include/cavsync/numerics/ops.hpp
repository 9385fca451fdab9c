// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_NUMERICS_OPS_HPP_
#define CAVSYNC_NUMERICS_OPS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "cavsync/errors.hpp"
#include "cavsync/numerics/kernels.hpp"
#include "cavsync/numerics/tensor.hpp"

// Differentiable primitives. Unless stated otherwise an op works on the 2-D
// view of its inputs: rows = product of leading extents, cols = last extent.

namespace cavsync::ops {

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree for " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  kernels::gemm(false, false, m, n, k, a.data().data(), k, b.data().data(), n, out.data(), n,
                false);
  return Tensor::make_result(
      {m, n}, std::move(out), {a, b},
      [m, n, k](cavsync::detail::Node& node) {
        const double* g = node.grad.data();
        if (double* ga = Tensor::parent_grad(node, 0)) {
          kernels::gemm(false, true, m, k, n, g, n, Tensor::parent_value(node, 1).data(), n, ga,
                        k, true);
        }
        if (double* gb = Tensor::parent_grad(node, 1)) {
          kernels::gemm(true, false, k, n, m, Tensor::parent_value(node, 0).data(), k, g, n, gb,
                        n, true);
        }
      },
      "matmul");
}

/// x W + b with W stored as [in, out] and b as [out].
inline Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t m = x.rows(), k = x.cols();
  if (w.rank() != 2 || w.rows() != k || b.numel() != w.cols()) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " weight " + shape_str(w.shape()) +
                     " bias " + shape_str(b.shape()));
  }
  const std::size_t n = w.cols();
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    std::copy(b.data().begin(), b.data().end(), out.begin() + r * n);
  }
  kernels::gemm(false, false, m, n, k, x.data().data(), k, w.data().data(), n, out.data(), n,
                true);
  Shape shape = x.shape();
  shape.back() = n;
  return Tensor::make_result(
      std::move(shape), std::move(out), {x, w, b},
      [m, n, k](cavsync::detail::Node& node) {
        const double* g = node.grad.data();
        if (double* gx = Tensor::parent_grad(node, 0)) {
          kernels::gemm(false, true, m, k, n, g, n, Tensor::parent_value(node, 1).data(), n, gx,
                        k, true);
        }
        if (double* gw = Tensor::parent_grad(node, 1)) {
          kernels::gemm(true, false, k, n, m, Tensor::parent_value(node, 0).data(), k, g, n, gw,
                        n, true);
        }
        if (double* gb = Tensor::parent_grad(node, 2)) {
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
          }
        }
      },
      "linear");
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b},
      [](cavsync::detail::Node& node) {
        const auto& g = node.grad;
        for (std::size_t p = 0; p < 2; ++p) {
          if (double* gp = Tensor::parent_grad(node, p)) {
            for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
          }
        }
      },
      "add");
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b},
      [](cavsync::detail::Node& node) {
        const auto& g = node.grad;
        if (double* ga = Tensor::parent_grad(node, 0)) {
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (double* gb = Tensor::parent_grad(node, 1)) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
      },
      "sub");
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return Tensor::make_result(
      a.shape(), std::move(out), {a, b},
      [](cavsync::detail::Node& node) {
        const auto& g = node.grad;
        const auto& av = Tensor::parent_value(node, 0);
        const auto& bv = Tensor::parent_value(node, 1);
        if (double* ga = Tensor::parent_grad(node, 0)) {
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
        }
        if (double* gb = Tensor::parent_grad(node, 1)) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
        }
      },
      "mul");
}

/// Adds a [cols] vector to every row of x.
inline Tensor add_row(const Tensor& x, const Tensor& row) {
  const std::size_t m = x.rows(), n = x.cols();
  if (row.numel() != n) {
    throw ShapeError("add_row: row " + shape_str(row.shape()) + " vs input " +
                     shape_str(x.shape()));
  }
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = x[r * n + c] + row[c];
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, row},
      [m, n](cavsync::detail::Node& node) {
        const auto& g = node.grad;
        if (double* gx = Tensor::parent_grad(node, 0)) {
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (double* gr = Tensor::parent_grad(node, 1)) {
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < n; ++c) gr[c] += g[r * n + c];
          }
        }
      },
      "add_row");
}

inline Tensor scale(const Tensor& x, double s) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * s;
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [s](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          for (std::size_t i = 0; i < node.grad.size(); ++i) gx[i] += s * node.grad[i];
        }
      },
      "scale");
}

/// Exact (erf-based) GELU.
inline Tensor gelu(const Tensor& x) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * kInvSqrt2));
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [inv_sqrt_2pi](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          const auto& xv = Tensor::parent_value(node, 0);
          for (std::size_t i = 0; i < xv.size(); ++i) {
            const double v = xv[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
            gx[i] += node.grad[i] * (cdf + v * pdf);
          }
        }
      },
      "gelu");
}

/// Per-row normalization to zero mean / unit variance followed by gain and
/// bias over the last dimension. Variance is the biased (1/n) estimate.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         double eps = 1e-6) {
  if (!(eps > 0.0)) throw ParameterError("layer_norm: eps must be > 0");
  const std::size_t m = x.rows(), n = x.cols();
  if (gain.numel() != n || bias.numel() != n) {
    throw ShapeError("layer_norm: gain " + shape_str(gain.shape()) + " / bias " +
                     shape_str(bias.shape()) + " vs input " + shape_str(x.shape()));
  }
  std::vector<double> out(x.numel()), xhat(x.numel()), inv_std(m);
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = x.data().data() + r * n;
    double mean = 0.0;
    for (std::size_t c = 0; c < n; ++c) mean += row[c];
    mean /= double(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= double(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      const double h = (row[c] - mean) * inv_std[r];
      xhat[r * n + c] = h;
      out[r * n + c] = h * gain[c] + bias[c];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gain, bias},
      [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](cavsync::detail::Node& node) {
        const auto& g = node.grad;
        const auto& gamma = Tensor::parent_value(node, 1);
        if (double* gx = Tensor::parent_grad(node, 0)) {
          for (std::size_t r = 0; r < m; ++r) {
            double sum_dh = 0.0, sum_dh_h = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
              const double dh = g[r * n + c] * gamma[c];
              sum_dh += dh;
              sum_dh_h += dh * xhat[r * n + c];
            }
            const double inv_n = 1.0 / double(n);
            for (std::size_t c = 0; c < n; ++c) {
              const double dh = g[r * n + c] * gamma[c];
              gx[r * n + c] +=
                  inv_std[r] * (dh - inv_n * sum_dh - xhat[r * n + c] * inv_n * sum_dh_h);
            }
          }
        }
        if (double* gg = Tensor::parent_grad(node, 1)) {
          for (std::size_t i = 0; i < g.size(); ++i) gg[i % n] += g[i] * xhat[i];
        }
        if (double* gb = Tensor::parent_grad(node, 2)) {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
        }
      },
      "layer_norm");
}

/// Row-wise softmax of x / temperature.
inline Tensor softmax_rows(const Tensor& x, double temperature = 1.0) {
  if (!(temperature > 0.0)) throw ParameterError("softmax_rows: temperature must be > 0");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = x.data().data() + r * n;
    double mx = row[0];
    for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, row[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      out[r * n + c] = std::exp((row[c] - mx) / temperature);
      z += out[r * n + c];
    }
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] /= z;
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [m, n, temperature](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          const auto& p = node.value;
          const auto& g = node.grad;
          for (std::size_t r = 0; r < m; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < n; ++c) dot += g[r * n + c] * p[r * n + c];
            for (std::size_t c = 0; c < n; ++c) {
              gx[r * n + c] += p[r * n + c] * (g[r * n + c] - dot) / temperature;
            }
          }
        }
      },
      "softmax_rows");
}

/// Row-wise log-softmax of x / temperature.
inline Tensor log_softmax_rows(const Tensor& x, double temperature = 1.0) {
  if (!(temperature > 0.0)) throw ParameterError("log_softmax_rows: temperature must be > 0");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = x.data().data() + r * n;
    double mx = row[0] / temperature;
    for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, row[c] / temperature);
    double z = 0.0;
    for (std::size_t c = 0; c < n; ++c) z += std::exp(row[c] / temperature - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = row[c] / temperature - lse;
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [m, n, temperature](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          const auto& lp = node.value;
          const auto& g = node.grad;
          for (std::size_t r = 0; r < m; ++r) {
            double gsum = 0.0;
            for (std::size_t c = 0; c < n; ++c) gsum += g[r * n + c];
            for (std::size_t c = 0; c < n; ++c) {
              gx[r * n + c] += (g[r * n + c] - std::exp(lp[r * n + c]) * gsum) / temperature;
            }
          }
        }
      },
      "log_softmax_rows");
}

inline Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return Tensor::make_result(
      {1}, {s}, {x},
      [](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          const std::size_t n = Tensor::parent_value(node, 0).size();
          for (std::size_t i = 0; i < n; ++i) gx[i] += node.grad[0];
        }
      },
      "sum");
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / double(x.numel())); }

/// Sum of squared entries.
inline Tensor sum_squares(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  return Tensor::make_result(
      {1}, {s}, {x},
      [](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          const auto& xv = Tensor::parent_value(node, 0);
          for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += 2.0 * xv[i] * node.grad[0];
        }
      },
      "sum_squares");
}

/// Mean over rows: [rows, cols] -> [1, cols].
inline Tensor mean_rows(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[c] += x[r * n + c];
  }
  for (auto& v : out) v /= double(m);
  return Tensor::make_result(
      {1, n}, std::move(out), {x},
      [m, n](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += node.grad[c] / double(m);
          }
        }
      },
      "mean_rows");
}

/// Biased variance of each row: [rows, cols] -> [rows, 1].
inline Tensor variance_rows(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m), means(m);
  for (std::size_t r = 0; r < m; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += x[r * n + c];
    mu /= double(n);
    double v = 0.0;
    for (std::size_t c = 0; c < n; ++c) v += (x[r * n + c] - mu) * (x[r * n + c] - mu);
    means[r] = mu;
    out[r] = v / double(n);
  }
  return Tensor::make_result(
      {m, 1}, std::move(out), {x},
      [m, n, means = std::move(means)](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          const auto& xv = Tensor::parent_value(node, 0);
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < n; ++c) {
              gx[r * n + c] += node.grad[r] * 2.0 * (xv[r * n + c] - means[r]) / double(n);
            }
          }
        }
      },
      "variance_rows");
}

inline Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(x.shape()));
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[c * m + r] = x[r * n + c];
  }
  return Tensor::make_result(
      {n, m}, std::move(out), {x},
      [m, n](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < n; ++c) gx[r * n + c] += node.grad[c * m + r];
          }
        }
      },
      "transpose");
}

inline Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::make_result(
      std::move(shape), std::move(out), {x},
      [](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          for (std::size_t i = 0; i < node.grad.size(); ++i) gx[i] += node.grad[i];
        }
      },
      "reshape");
}

/// Stacks 2-D views along rows. All inputs must share a column count.
inline Tensor concat_rows(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t n = xs.front().cols();
  std::size_t total = 0;
  for (const auto& x : xs) {
    if (x.cols() != n) {
      throw ShapeError("concat_rows: column mismatch " + shape_str(xs.front().shape()) + " vs " +
                       shape_str(x.shape()));
    }
    total += x.rows();
  }
  std::vector<double> out;
  out.reserve(total * n);
  std::vector<std::size_t> offsets;
  for (const auto& x : xs) {
    offsets.push_back(out.size());
    out.insert(out.end(), x.data().begin(), x.data().end());
  }
  return Tensor::make_result(
      {total, n}, std::move(out), xs,
      [offsets = std::move(offsets)](cavsync::detail::Node& node) {
        for (std::size_t p = 0; p < offsets.size(); ++p) {
          if (double* gp = Tensor::parent_grad(node, p)) {
            const std::size_t len = Tensor::parent_value(node, p).size();
            for (std::size_t i = 0; i < len; ++i) gp[i] += node.grad[offsets[p] + i];
          }
        }
      },
      "concat_rows");
}

/// Joins 2-D views along columns. All inputs must share a row count.
inline Tensor concat_cols(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = xs.front().rows();
  std::size_t total = 0;
  std::vector<std::size_t> col_offsets;
  for (const auto& x : xs) {
    if (x.rows() != m) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(xs.front().shape()) + " vs " +
                       shape_str(x.shape()));
    }
    col_offsets.push_back(total);
    total += x.cols();
  }
  std::vector<double> out(m * total);
  for (std::size_t p = 0; p < xs.size(); ++p) {
    const std::size_t w = xs[p].cols();
    for (std::size_t r = 0; r < m; ++r) {
      std::copy_n(xs[p].data().begin() + r * w, w, out.begin() + r * total + col_offsets[p]);
    }
  }
  return Tensor::make_result(
      {m, total}, std::move(out), xs,
      [m, total, col_offsets = std::move(col_offsets)](cavsync::detail::Node& node) {
        for (std::size_t p = 0; p < col_offsets.size(); ++p) {
          if (double* gp = Tensor::parent_grad(node, p)) {
            const std::size_t w = Tensor::parent_value(node, p).size() / m;
            for (std::size_t r = 0; r < m; ++r) {
              for (std::size_t c = 0; c < w; ++c) {
                gp[r * w + c] += node.grad[r * total + col_offsets[p] + c];
              }
            }
          }
        }
      },
      "concat_cols");
}

/// Rows [begin, end) of the 2-D view.
inline Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t n = x.cols();
  if (begin >= end || end > x.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of " + shape_str(x.shape()));
  }
  std::vector<double> out(x.data().begin() + begin * n, x.data().begin() + end * n);
  return Tensor::make_result(
      {end - begin, n}, std::move(out), {x},
      [begin, n](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          for (std::size_t i = 0; i < node.grad.size(); ++i) gx[begin * n + i] += node.grad[i];
        }
      },
      "slice_rows");
}

/// Columns [begin, end) of the 2-D view.
inline Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t m = x.rows(), n = x.cols();
  if (begin >= end || end > n) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of " + shape_str(x.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<double> out(m * w);
  for (std::size_t r = 0; r < m; ++r) {
    std::copy_n(x.data().begin() + r * n + begin, w, out.begin() + r * w);
  }
  return Tensor::make_result(
      {m, w}, std::move(out), {x},
      [m, n, w, begin](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t c = 0; c < w; ++c) gx[r * n + begin + c] += node.grad[r * w + c];
          }
        }
      },
      "slice_cols");
}

/// Row lookup (embedding gather): out[i] = x[indices[i]]. Repeated indices
/// accumulate in the backward pass.
inline Tensor gather_rows(const Tensor& x, std::span<const std::size_t> indices) {
  const std::size_t n = x.cols(), rows = x.rows();
  if (indices.empty()) throw ShapeError("gather_rows: empty index list");
  std::vector<double> out(indices.size() * n);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[i]) + " out of " +
                       shape_str(x.shape()));
    }
    std::copy_n(x.data().begin() + indices[i] * n, n, out.begin() + i * n);
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return Tensor::make_result(
      {indices.size(), n}, std::move(out), {x},
      [n, idx = std::move(idx)](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t c = 0; c < n; ++c) gx[idx[i] * n + c] += node.grad[i * n + c];
          }
        }
      },
      "gather_rows");
}

/// Scales every row to unit Euclidean norm. A zero row is a numeric error.
inline Tensor l2_normalize_rows(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(x.numel()), norms(m);
  for (std::size_t r = 0; r < m; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += x[r * n + c] * x[r * n + c];
    norms[r] = std::sqrt(s);
    if (!(norms[r] > 0.0) || !std::isfinite(norms[r])) {
      throw NumericError("l2_normalize_rows: row " + std::to_string(r) + " has zero norm");
    }
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = x[r * n + c] / norms[r];
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x},
      [m, n, norms = std::move(norms)](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          const auto& y = node.value;
          const auto& g = node.grad;
          for (std::size_t r = 0; r < m; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < n; ++c) dot += g[r * n + c] * y[r * n + c];
            for (std::size_t c = 0; c < n; ++c) {
              gx[r * n + c] += (g[r * n + c] - y[r * n + c] * dot) / norms[r];
            }
          }
        }
      },
      "l2_normalize_rows");
}

/// Diagonal of a square matrix as a [n] vector.
inline Tensor diagonal(const Tensor& x) {
  if (x.rank() != 2 || x.rows() != x.cols()) {
    throw ShapeError("diagonal: expected square matrix, got " + shape_str(x.shape()));
  }
  const std::size_t n = x.rows();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i * n + i];
  return Tensor::make_result(
      {n}, std::move(out), {x},
      [n](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          for (std::size_t i = 0; i < n; ++i) gx[i * n + i] += node.grad[i];
        }
      },
      "diagonal");
}

/// Mean binary cross-entropy between sigmoid(logits) and targets in [0, 1].
inline Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  detail::require_same_shape(logits, targets, "bce_with_logits");
  const std::size_t n = logits.numel();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits[i], y = targets[i];
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  return Tensor::make_result(
      {1}, {total / double(n)}, {logits, targets},
      [n](cavsync::detail::Node& node) {
        const auto& z = Tensor::parent_value(node, 0);
        const auto& y = Tensor::parent_value(node, 1);
        if (double* gz = Tensor::parent_grad(node, 0)) {
          for (std::size_t i = 0; i < n; ++i) {
            const double sig = 1.0 / (1.0 + std::exp(-z[i]));
            gz[i] += node.grad[0] * (sig - y[i]) / double(n);
          }
        }
        if (double* gy = Tensor::parent_grad(node, 1)) {
          for (std::size_t i = 0; i < n; ++i) gy[i] -= node.grad[0] * z[i] / double(n);
        }
      },
      "bce_with_logits");
}


/// Per-sequence mean over a row range.
///
/// x is [batch * seq_len, cols]; for every block of `seq_len` rows the rows
/// [begin, end) of that block are averaged, giving [batch, cols].
inline Tensor segment_mean_rows(const Tensor& x, std::size_t seq_len, std::size_t begin,
                                std::size_t end) {
  const std::size_t n = x.cols();
  if (seq_len == 0 || x.rows() % seq_len != 0 || begin >= end || end > seq_len) {
    throw ShapeError("segment_mean_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") of " + std::to_string(seq_len) +
                     "-row blocks in " + shape_str(x.shape()));
  }
  const std::size_t batch = x.rows() / seq_len;
  const double inv = 1.0 / double(end - begin);
  std::vector<double> out(batch * n, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t r = begin; r < end; ++r) {
      const double* row = x.data().data() + (b * seq_len + r) * n;
      for (std::size_t c = 0; c < n; ++c) out[b * n + c] += row[c] * inv;
    }
  }
  return Tensor::make_result(
      {batch, n}, std::move(out), {x},
      [batch, n, seq_len, begin, end, inv](cavsync::detail::Node& node) {
        if (double* gx = Tensor::parent_grad(node, 0)) {
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t r = begin; r < end; ++r) {
              for (std::size_t c = 0; c < n; ++c) {
                gx[(b * seq_len + r) * n + c] += node.grad[b * n + c] * inv;
              }
            }
          }
        }
      },
      "segment_mean_rows");
}

}  // namespace cavsync::ops

#endif  // CAVSYNC_NUMERICS_OPS_HPP_
