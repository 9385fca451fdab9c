// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_NUMERICS_FINITE_DIFF_HPP_
#define CAVSYNC_NUMERICS_FINITE_DIFF_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "cavsync/errors.hpp"
#include "cavsync/numerics/tensor.hpp"

namespace cavsync {

/// Central-difference gradient of a scalar function at x.
///
/// `f` is called with perturbed copies of x and never sees the original
/// tensor, so it cannot observe gradient state.
template <class F>
Tensor finite_diff_grad(F&& f, const Tensor& x, double step = 1e-5) {
  if (!(step > 0.0)) throw ParameterError("finite_diff_grad: step must be > 0");
  std::vector<double> base(x.data().begin(), x.data().end());
  std::vector<double> grad(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<double> plus = base, minus = base;
    plus[i] += step;
    minus[i] -= step;
    const double fp = f(Tensor(x.shape(), std::move(plus)));
    const double fm = f(Tensor(x.shape(), std::move(minus)));
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return Tensor(x.shape(), std::move(grad));
}

/// Central differences of a closure with respect to a leaf tensor that the
/// closure reads by reference. Values are restored after each probe.
template <class F>
std::vector<double> finite_diff_inplace(F&& f, Tensor& leaf, double step = 1e-5) {
  if (!(step > 0.0)) throw ParameterError("finite_diff_inplace: step must be > 0");
  auto values = leaf.mutable_data();
  std::vector<double> grad(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + step;
    const double fp = f();
    values[i] = saved - step;
    const double fm = f();
    values[i] = saved;
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

/// Largest elementwise |a - b| / max(|a|, |b|, floor).
inline double max_relative_error(std::span<const double> a, std::span<const double> b,
                                 double floor = 1e-6) {
  if (a.size() != b.size()) throw ShapeError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace cavsync

#endif  // CAVSYNC_NUMERICS_FINITE_DIFF_HPP_
