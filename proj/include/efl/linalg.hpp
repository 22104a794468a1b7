// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "efl/tensor.hpp"

namespace efl {

/// Thin SVD a = u · diag(s) · vt with k = min(m, n).
struct SvdResult {
  Tensor u;               // m x k, orthonormal columns
  std::vector<double> s;  // non-increasing, non-negative
  Tensor vt;              // k x n, orthonormal rows
  int sweeps = 0;
};

/// One-sided Jacobi SVD.
///
/// Column pairs are visited in a fixed (i < j) order every sweep, and a sweep
/// with no rotation above 1e-12 relative off-diagonal mass terminates the
/// iteration (at most 100 sweeps). Singular triples are sorted by descending
/// value and signed so that the largest-magnitude entry of every left
/// singular vector is positive; identical input bits give identical output.
/// Left vectors for zero singular values are completed to an orthonormal set.
SvdResult svd(const Tensor& a);

/// Inverse square root of a symmetric positive semi-definite matrix after
/// adding `ridge` to the diagonal.
Tensor inverse_sqrt_psd(const Tensor& a, double ridge);

}  // namespace efl
