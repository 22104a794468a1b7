// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "efl/linalg.hpp"
#include "test_util.hpp"

namespace efl {
namespace {

using testing::random_tensor;

Tensor reconstruct(const SvdResult& f) {
  Tensor us = f.u;
  for (std::size_t i = 0; i < us.dim(0); ++i)
    for (std::size_t j = 0; j < us.dim(1); ++j) us.at(i, j) *= f.s[j];
  return matmul(us, f.vt);
}

double orthonormality_error(const Tensor& rows_or_cols, bool columns) {
  const Tensor g = columns ? matmul_tn(rows_or_cols, rows_or_cols)
                           : matmul_nt(rows_or_cols, rows_or_cols);
  return max_abs_diff(g, Tensor::identity(g.dim(0)));
}

void expect_valid_svd(const Tensor& a, const SvdResult& f) {
  const std::size_t k = std::min(a.dim(0), a.dim(1));
  ASSERT_EQ(f.s.size(), k);
  ASSERT_EQ(f.u.shape(), (Shape{a.dim(0), k}));
  ASSERT_EQ(f.vt.shape(), (Shape{k, a.dim(1)}));
  for (std::size_t i = 0; i < k; ++i) {
    EXPECT_GE(f.s[i], 0.0);
    if (i > 0) {
      EXPECT_LE(f.s[i], f.s[i - 1]);
    }
  }
  EXPECT_LT(orthonormality_error(f.u, true), 1e-10);
  EXPECT_LT(orthonormality_error(f.vt, false), 1e-10);
  const double norm = frobenius_norm(a);
  if (norm > 0) {
    EXPECT_LT(frobenius_norm(sub(reconstruct(f), a)) / norm, 1e-10);
  }
}

TEST(Svd, IdentityHasUnitSingularValues) {
  const SvdResult f = svd(Tensor::identity(3));
  EXPECT_EQ(f.s, (std::vector<double>{1, 1, 1}));
}

TEST(Svd, DiagonalIsPermutationAligned) {
  const Tensor d = Tensor::matrix(3, 3, {1, 0, 0, 0, 5, 0, 0, 0, 3});
  const SvdResult f = svd(d);
  EXPECT_NEAR(f.s[0], 5.0, 1e-14);
  EXPECT_NEAR(f.s[1], 3.0, 1e-14);
  EXPECT_NEAR(f.s[2], 1.0, 1e-14);
  // Largest-magnitude entry of each left vector is positive: u = permutation.
  EXPECT_DOUBLE_EQ(f.u.at(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(f.u.at(2, 1), 1.0);
  EXPECT_DOUBLE_EQ(f.u.at(0, 2), 1.0);
  EXPECT_DOUBLE_EQ(f.vt.at(0, 1), 1.0);
  expect_valid_svd(d, f);
}

TEST(Svd, RandomTallMatchesEigenvalueOracle) {
  const Tensor a = random_tensor({20, 12}, 99);
  const SvdResult f = svd(a);
  expect_valid_svd(a, f);

  Eigen::MatrixXd m(20, 12);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 12; ++j) m(i, j) = a.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.transpose() * m);
  std::vector<double> ev(eig.eigenvalues().data(), eig.eigenvalues().data() + 12);
  std::sort(ev.rbegin(), ev.rend());
  for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(f.s[i] * f.s[i], ev[i], 1e-8) << i;
}

TEST(Svd, WideAndRankDeficientInputs) {
  const Tensor wide = random_tensor({4, 9}, 5);
  expect_valid_svd(wide, svd(wide));

  // Rank 2: outer products of two random vector pairs.
  const Tensor l = random_tensor({8, 2}, 6);
  const Tensor r = random_tensor({2, 6}, 7);
  const Tensor low = matmul(l, r);
  const SvdResult f = svd(low);
  expect_valid_svd(low, f);
  for (std::size_t i = 2; i < f.s.size(); ++i) EXPECT_LT(f.s[i], 1e-10 * f.s[0]);

  const Tensor zero({3, 2}, 0.0);
  const SvdResult z = svd(zero);
  expect_valid_svd(zero, z);
  EXPECT_EQ(z.s, (std::vector<double>{0, 0}));
}

TEST(Svd, SingleRowAndColumn) {
  const Tensor row = Tensor::matrix(1, 3, {3, 0, -4});
  const SvdResult f = svd(row);
  EXPECT_NEAR(f.s[0], 5.0, 1e-14);
  expect_valid_svd(row, f);
  expect_valid_svd(transpose(row), svd(transpose(row)));
}

class SvdDeterminism : public ::testing::TestWithParam<int> {};

TEST_P(SvdDeterminism, RepeatedCallsGiveIdenticalBits) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  const Tensor a = random_tensor({3 + seed % 9, 2 + (seed * 5) % 7}, seed);
  const SvdResult f = svd(a), g = svd(a);
  EXPECT_EQ(f.u, g.u);
  EXPECT_EQ(f.s, g.s);
  EXPECT_EQ(f.vt, g.vt);
  expect_valid_svd(a, f);
  // Sign convention: largest-magnitude entry of every left vector is positive.
  for (std::size_t j = 0; j < f.u.dim(1); ++j) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < f.u.dim(0); ++i)
      if (std::abs(f.u.at(i, j)) > std::abs(f.u.at(best, j))) best = i;
    EXPECT_GT(f.u.at(best, j), 0.0);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, SvdDeterminism, ::testing::Range(1, 21));

TEST(Svd, NonFiniteInputIsNumericError) {
  Tensor a({2, 2}, 1.0);
  a[3] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(svd(a), NumericError);
}

TEST(InverseSqrt, WhitensAPositiveDefiniteMatrix) {
  const Tensor b = random_tensor({5, 5}, 8);
  Tensor spd = matmul_tn(b, b);
  for (std::size_t i = 0; i < 5; ++i) spd.at(i, i) += 1.0;
  const Tensor w = inverse_sqrt_psd(spd, 0.0);
  EXPECT_LT(max_abs_diff(matmul(matmul(w, spd), w), Tensor::identity(5)), 1e-10);
}

}  // namespace
}  // namespace efl
