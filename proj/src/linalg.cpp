// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace efl {
namespace {

constexpr double kJacobiTolerance = 1e-12;
constexpr int kMaxSweeps = 100;

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void rotate(double* x, double* y, std::size_t n, double c, double s) {
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

struct ColumnSvd {
  std::size_t rows = 0;  // length of each column of w
  std::size_t cols = 0;
  std::vector<double> w;  // column-major, rows x cols
  std::vector<double> v;  // column-major, cols x cols
  int sweeps = 0;
};

// Hestenes iteration on a tall (rows >= cols) matrix given column-major.
ColumnSvd jacobi_tall(std::vector<double> w, std::size_t rows,
                      std::size_t cols) {
  ColumnSvd r{rows, cols, std::move(w), std::vector<double>(cols * cols), 0};
  for (std::size_t i = 0; i < cols; ++i) r.v[i * cols + i] = 1.0;

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < cols; ++i) {
      for (std::size_t j = i + 1; j < cols; ++j) {
        double* wi = r.w.data() + i * rows;
        double* wj = r.w.data() + j * rows;
        const double alpha = dot(wi, wi, rows);
        const double beta = dot(wj, wj, rows);
        const double gamma = dot(wi, wj, rows);
        if (gamma == 0.0 ||
            std::abs(gamma) <= kJacobiTolerance * std::sqrt(alpha * beta)) {
          continue;
        }
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(wi, wj, rows, c, s);
        rotate(r.v.data() + i * cols, r.v.data() + j * cols, cols, c, s);
      }
    }
    r.sweeps = sweep + 1;
    if (!rotated) break;
  }
  return r;
}

}  // namespace

SvdResult svd(const Tensor& a) {
  if (a.rank() != 2) {
    throw DimensionError("svd expects a matrix, got " + shape_str(a.shape()));
  }
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (m == 0 || n == 0) throw DimensionError("svd of an empty matrix");
  require_finite(a, "svd input");

  // Work on the tall orientation; `left_len` is the length of a left
  // singular vector of the original matrix.
  const bool wide = m < n;
  const std::size_t rows = wide ? n : m;
  const std::size_t cols = wide ? m : n;
  std::vector<double> w(rows * cols);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      // Column-major over the tall matrix: tall(r, c) = wide ? a(c, r) : a(r, c)
      if (wide) {
        w[i * rows + j] = a.at(i, j);
      } else {
        w[j * rows + i] = a.at(i, j);
      }
    }
  }
  ColumnSvd cs = jacobi_tall(std::move(w), rows, cols);

  const std::size_t k = cols;
  std::vector<double> sigma(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double* col = cs.w.data() + c * rows;
    sigma[c] = std::sqrt(dot(col, col, rows));
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  // Tall-orientation factors in sorted order: `big` holds normalized columns
  // of w (length rows), `small` holds columns of v (length cols).
  const double smax = sigma[order[0]];
  const double tiny =
      smax * std::numeric_limits<double>::epsilon() * static_cast<double>(rows);
  std::vector<double> big(rows * k, 0.0), small(cols * k, 0.0);
  std::vector<double> s(k);
  std::vector<bool> degenerate(k, false);
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t c = order[r];
    s[r] = sigma[c];
    std::copy_n(cs.v.data() + c * cols, cols, small.data() + r * cols);
    if (sigma[c] > tiny && sigma[c] > 0.0) {
      const double* col = cs.w.data() + c * rows;
      for (std::size_t i = 0; i < rows; ++i) big[r * rows + i] = col[i] / sigma[c];
    } else {
      degenerate[r] = true;
    }
  }
  // Complete null directions so the long-side factor stays orthonormal.
  for (std::size_t r = 0; r < k; ++r) {
    if (!degenerate[r]) continue;
    double* target = big.data() + r * rows;
    for (std::size_t e = 0; e < rows; ++e) {
      std::fill(target, target + rows, 0.0);
      target[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t q = 0; q < k; ++q) {
          if (q == r || (degenerate[q] && q > r)) continue;
          const double* other = big.data() + q * rows;
          const double proj = dot(target, other, rows);
          for (std::size_t i = 0; i < rows; ++i) target[i] -= proj * other[i];
        }
      }
      const double norm = std::sqrt(dot(target, target, rows));
      if (norm > 0.5) {
        for (std::size_t i = 0; i < rows; ++i) target[i] /= norm;
        break;
      }
    }
  }

  // Map back: for a tall input u = big, v = small; for a wide input the
  // roles swap.
  SvdResult out{Tensor({m, k}), std::move(s), Tensor({k, n}), cs.sweeps};
  const std::vector<double>& left = wide ? small : big;
  const std::vector<double>& right = wide ? big : small;
  for (std::size_t r = 0; r < k; ++r) {
    const double* lu = left.data() + r * m;
    std::size_t arg = 0;
    for (std::size_t i = 1; i < m; ++i)
      if (std::abs(lu[i]) > std::abs(lu[arg])) arg = i;
    const double sign = lu[arg] < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < m; ++i) out.u.at(i, r) = sign * lu[i];
    const double* rv = right.data() + r * n;
    for (std::size_t j = 0; j < n; ++j) out.vt.at(r, j) = sign * rv[j];
  }
  return out;
}

Tensor inverse_sqrt_psd(const Tensor& a, double ridge) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1)) {
    throw DimensionError("inverse_sqrt_psd expects a square matrix, got " +
                         shape_str(a.shape()));
  }
  const std::size_t n = a.dim(0);
  Tensor shifted = a;
  for (std::size_t i = 0; i < n; ++i) shifted.at(i, i) += ridge;
  const SvdResult f = svd(shifted);
  Tensor out({n, n});
  for (std::size_t r = 0; r < n; ++r) {
    if (f.s[r] <= 0.0) continue;
    const double w = 1.0 / std::sqrt(f.s[r]);
    for (std::size_t i = 0; i < n; ++i) {
      const double vi = f.vt.at(r, i) * w;
      for (std::size_t j = 0; j < n; ++j) out.at(i, j) += vi * f.vt.at(r, j);
    }
  }
  return out;
}

}  // namespace efl
