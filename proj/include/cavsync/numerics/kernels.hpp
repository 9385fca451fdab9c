// Copyright 2026 The cavsync Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVSYNC_NUMERICS_KERNELS_HPP_
#define CAVSYNC_NUMERICS_KERNELS_HPP_

#include <cstddef>

#include <Eigen/Core>

namespace cavsync::kernels {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstView = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;
using View = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;

/// C (+)= op(A) * op(B) on strided row-major blocks.
///
/// op(A) is m x k and op(B) is k x n. `lda`/`ldb`/`ldc` are row strides of the
/// stored (untransposed) operands. When `accumulate` is false C is overwritten.
inline void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 const double* a, std::size_t lda, const double* b, std::size_t ldb,
                 double* c, std::size_t ldc, bool accumulate) {
  using Eigen::Index;
  const Index ar = trans_a ? Index(k) : Index(m);
  const Index ac = trans_a ? Index(m) : Index(k);
  const Index br = trans_b ? Index(n) : Index(k);
  const Index bc = trans_b ? Index(k) : Index(n);
  ConstView A(a, ar, ac, Eigen::OuterStride<>(Index(lda)));
  ConstView B(b, br, bc, Eigen::OuterStride<>(Index(ldb)));
  View C(c, Index(m), Index(n), Eigen::OuterStride<>(Index(ldc)));
  if (!accumulate) C.setZero();
  if (!trans_a && !trans_b) {
    C.noalias() += A * B;
  } else if (!trans_a && trans_b) {
    C.noalias() += A * B.transpose();
  } else if (trans_a && !trans_b) {
    C.noalias() += A.transpose() * B;
  } else {
    C.noalias() += A.transpose() * B.transpose();
  }
}

}  // namespace cavsync::kernels

#endif  // CAVSYNC_NUMERICS_KERNELS_HPP_
