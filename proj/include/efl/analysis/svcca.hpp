// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "efl/nn/network.hpp"
#include "efl/tensor.hpp"

namespace efl::analysis {

/// neurons x samples; one column per evaluation sample.
struct ActivationMatrix {
  std::string layer;
  Tensor matrix;
};

inline constexpr std::size_t kDefaultSvccaDirections = 4;
inline constexpr double kCovarianceRidge = 1e-10;

struct SvccaResult {
  double value = 0.0;  // mean canonical correlation, in [0,1]
  std::size_t k_requested = 0;
  std::size_t k_used = 0;  // reduced when either input has rank < k
  std::vector<double> correlations;
};

/// Centers every neuron, keeps the top-k singular directions of each input
/// (rows of diag(s_k) * vt_k), and returns the mean canonical correlation
/// between the two k x n projections.
SvccaResult svcca(const ActivationMatrix& x, const ActivationMatrix& y,
                  std::size_t k = kDefaultSvccaDirections);

/// Max of svcca over all unordered pairs.
double pairwise_max_svcca(std::span<const ActivationMatrix> mats,
                          std::size_t k = kDefaultSvccaDirections);

/// Mean of per-batch svcca values.
double batched_svcca(std::span<const ActivationMatrix> x_batches,
                     std::span<const ActivationMatrix> y_batches,
                     std::size_t k = kDefaultSvccaDirections);

/// Eval-mode outputs of the requested layers on `inputs`. Outputs with
/// spatial extent (C,H,W) are averaged over H and W so each channel is one
/// neuron; matrices are (neurons x N).
std::vector<ActivationMatrix> layer_activations(const nn::Network& net,
                                                const Tensor& inputs,
                                                std::span<const std::size_t> layers);

/// Indices of Conv2D and Dense layers, the layers SVCCA is reported for.
std::vector<std::size_t> weight_layers(const nn::Network& net);

}  // namespace efl::analysis
