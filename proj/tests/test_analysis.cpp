// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "efl/analysis/capacity.hpp"
#include "efl/analysis/svcca.hpp"
#include "test_util.hpp"

namespace efl::analysis {
namespace {

using testing::random_tensor;

ActivationMatrix act(Tensor m) { return {"l", std::move(m)}; }

// Rows 0..2 are independent noise; row 3 duplicates row 0 so rank is 3.
Tensor low_rank(std::size_t n, std::uint64_t seed) {
  Tensor t = random_tensor({4, n}, seed);
  for (std::size_t j = 0; j < n; ++j) t.at(3, j) = t.at(0, j);
  return t;
}

TEST(Svcca, SelfSimilarityIsOne) {
  const auto x = act(random_tensor({6, 200}, 1));
  EXPECT_NEAR(svcca(x, x).value, 1.0, 1e-8);
}

TEST(Svcca, SymmetricAndInRange) {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const auto x = act(random_tensor({6, 100}, s));
    const auto y = act(random_tensor({5, 100}, s + 100));
    const double a = svcca(x, y).value, b = svcca(y, x).value;
    EXPECT_NEAR(a, b, 1e-8);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(Svcca, InvariantToInvertibleLinearMaps) {
  // Four neurons so the top-4 subspace is the whole space and any
  // invertible mix leaves the canonical correlations at 1.
  const Tensor x = random_tensor({4, 300}, 2);
  Tensor mix = random_tensor({4, 4}, 3);
  for (std::size_t i = 0; i < 4; ++i) mix.at(i, i) += 3.0;
  EXPECT_NEAR(svcca(act(x), act(matmul(mix, x))).value, 1.0, 1e-8);
}

TEST(Svcca, IndependentActivationsAreDissimilar) {
  const auto x = act(random_tensor({8, 2000}, 4));
  const auto y = act(random_tensor({8, 2000}, 5));
  EXPECT_LT(svcca(x, y).value, 0.2);
}

TEST(Svcca, CenteringInvariance) {
  const Tensor x = random_tensor({5, 150}, 6);
  const Tensor y = random_tensor({5, 150}, 7);
  Tensor shifted = y;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 150; ++j) shifted.at(i, j) += 10.0 * static_cast<double>(i + 1);
  EXPECT_NEAR(svcca(act(x), act(y)).value, svcca(act(x), act(shifted)).value, 1e-10);
}

TEST(Svcca, MonotoneUnderCorruption) {
  const std::vector<double> lambdas = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> mean(lambdas.size(), 0.0);
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const Tensor x = random_tensor({6, 300}, s);
    const Tensor noise = random_tensor({6, 300}, s + 50);
    for (std::size_t l = 0; l < lambdas.size(); ++l)
      mean[l] += svcca(act(x), act(add(scale(x, 1 - lambdas[l]), scale(noise, lambdas[l]))))
                     .value /
                 10.0;
  }
  for (std::size_t l = 1; l < lambdas.size(); ++l) EXPECT_LE(mean[l], mean[l - 1] + 1e-12);
  EXPECT_GT(mean.front() - mean.back(), 0.5);
}

TEST(Svcca, KShrinksToRank) {
  const auto x = act(low_rank(200, 8));
  const auto r = svcca(x, act(random_tensor({6, 200}, 9)), 4);
  EXPECT_EQ(r.k_requested, 4u);
  EXPECT_EQ(r.k_used, 3u);
  EXPECT_EQ(r.correlations.size(), 3u);
}

TEST(Svcca, MismatchedSampleCountsAreRejected) {
  EXPECT_THROW(svcca(act(Tensor({3, 10})), act(Tensor({3, 11}))), std::exception);
}

TEST(Svcca, PairwiseMaxMatchesBruteForce) {
  std::vector<ActivationMatrix> mats;
  const Tensor base = random_tensor({5, 120}, 10);
  for (std::uint64_t s = 0; s < 4; ++s)
    mats.push_back(act(add(base, random_tensor({5, 120}, 20 + s, 0.5 + s))));
  double brute = 0.0;
  for (std::size_t i = 0; i < mats.size(); ++i)
    for (std::size_t j = i + 1; j < mats.size(); ++j)
      brute = std::max(brute, svcca(mats[i], mats[j]).value);
  EXPECT_EQ(pairwise_max_svcca(mats), brute);
  EXPECT_THROW(pairwise_max_svcca(std::span<const ActivationMatrix>(mats.data(), 1)),
               std::invalid_argument);
}

TEST(Svcca, BatchedIsTheMeanOfBatches) {
  const auto x1 = act(random_tensor({5, 80}, 30));
  const auto y1 = act(random_tensor({5, 80}, 31));
  const auto x2 = act(random_tensor({5, 80}, 32));
  const auto y2 = act(add(x2.matrix, random_tensor({5, 80}, 33, 0.3)));
  const std::vector<ActivationMatrix> xs = {x1, x2}, ys = {y1, y2};
  EXPECT_NEAR(batched_svcca(xs, ys), (svcca(x1, y1).value + svcca(x2, y2).value) / 2, 1e-15);
  const std::vector<ActivationMatrix> one_x = {x1}, one_y = {y1};
  EXPECT_EQ(batched_svcca(one_x, one_y), svcca(x1, y1).value);
  const std::vector<ActivationMatrix> rep_x = {x1, x1}, rep_y = {y1, y1};
  EXPECT_NEAR(batched_svcca(rep_x, rep_y), svcca(x1, y1).value, 1e-15);
}

TEST(Svcca, LayerActivationsPoolSpatialAxes) {
  nn::Network net = testing::small_cnn();
  Rng rng(1);
  net.initialize(rng);
  const Tensor x = random_tensor({7, 1, 4, 4}, 2);
  const auto layers = weight_layers(net);
  EXPECT_EQ(layers, (std::vector<std::size_t>{0, 4, 8, 10}));
  const auto acts = layer_activations(net, x, layers);
  ASSERT_EQ(acts.size(), 4u);
  EXPECT_EQ(acts[0].layer, "conv1");
  EXPECT_EQ(acts[0].matrix.shape(), (Shape{3, 7}));
  EXPECT_EQ(acts[2].matrix.shape(), (Shape{8, 7}));
  const Tensor conv_out = nn::infer_range(net, x, 0, 1);
  double mean = 0.0;
  for (std::size_t p = 0; p < 16; ++p) mean += conv_out[16 + p] / 16.0;  // sample 0, channel 1
  EXPECT_NEAR(acts[0].matrix.at(1, 0), mean, 1e-12);
}

TEST(Capacity, TableRows) {
  const CapacityCounts resnet{272762, 6947136}, cnn{6603710, 39742};
  EXPECT_DOUBLE_EQ(capacity(resnet, resnet), 1.0);
  EXPECT_NEAR(capacity({257994, 2752832}, resnet), 0.42, 0.005);
  const double weak = capacity({206346, 917824}, resnet);
  EXPECT_NEAR(weak, 0.15570, 1e-5);
  EXPECT_NEAR(weak, 0.16, 0.005);
  EXPECT_NEAR(capacity({6551614, 2110}, cnn), 0.99, 0.005);
  const double cnn_weak = capacity({127038, 62}, cnn);
  EXPECT_NEAR(cnn_weak, 0.01913, 1e-5);
  EXPECT_NEAR(cnn_weak, 0.02, 0.005);
  EXPECT_THROW(capacity({1, 1}, {0, 0}), std::invalid_argument);
}

TEST(Capacity, ScaleConsistent) {
  const CapacityCounts sub{206346, 917824}, full{272762, 6947136};
  for (std::uint64_t m : {2u, 7u, 1000u})
    EXPECT_NEAR(capacity({sub.p * m, sub.a * m}, {full.p * m, full.a * m}), capacity(sub, full),
                1e-15);
}

TEST(Capacity, AverageOverTiers) {
  const std::vector<TierShare> c5 = {{1.00, 64}, {0.16, 64}};
  const std::vector<TierShare> c6 = {{1.00, 32}, {0.16, 96}};
  const std::vector<TierShare> c7 = {{1.00, 16}, {0.16, 112}};
  EXPECT_NEAR(avg_capacity(c5), 0.58, 0.01);
  EXPECT_NEAR(avg_capacity(c6), 0.37, 0.01);
  EXPECT_NEAR(avg_capacity(c7), 0.27, 0.01);
  const std::vector<TierShare> single = {{0.3, 5}};
  EXPECT_DOUBLE_EQ(avg_capacity(single), 0.3);
}

TEST(Capacity, CountsFollowTheTrainedSuffix) {
  const nn::Network net = testing::small_mlp(5, 6, 3);
  const auto full = count_model(net, 0, 4);
  EXPECT_EQ(full.p, net.parameter_count(0));
  EXPECT_EQ(full.a, net.activation_count(0, 4));
  const auto tail = count_model(net, 4, 4);
  EXPECT_EQ(tail.p, 21u);
  EXPECT_LT(capacity(tail, full), 1.0);
}

}  // namespace
}  // namespace efl::analysis
