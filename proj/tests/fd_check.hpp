// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "efl/nn/network.hpp"
#include "test_util.hpp"

namespace efl::testing {

using nn::BackwardResult;
using nn::Mode;
using nn::Network;

inline double train_loss(Network& net, const Tensor& x, const std::vector<int>& y) {
  return nn::softmax_cross_entropy(nn::forward(net, x, Mode::Train).logits, y).loss;
}

// ReLU sign pattern and MaxPool winners for a Train-mode pass. Central
// differences are meaningless when a perturbation changes this pattern.
inline std::vector<std::size_t> kink_pattern(Network& net, const Tensor& x) {
  auto fr = nn::forward(net, x, Mode::Train);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const auto& rec = fr.trace.records[i];
    if (std::holds_alternative<nn::ReLU>(net.layer(i).kind))
      for (double v : rec.input.values()) out.push_back(v > 0.0);
    out.insert(out.end(), rec.argmax.begin(), rec.argmax.end());
  }
  return out;
}

struct FdReport {
  double worst = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // perturbation crossed a kink
};

// Compares backprop with central differences (step 1e-4) over every
// parameter of every layer >= from_layer.
inline FdReport gradient_check(Network& net, const Tensor& x, const std::vector<int>& y,
                        std::size_t from_layer = 0) {
  auto fr = nn::forward(net, x, Mode::Train);
  const BackwardResult br = nn::backward(net, fr.trace, y, from_layer);
  const auto base = kink_pattern(net, x);
  const double h = 1e-4;
  FdReport rep;
  for (std::size_t i = from_layer; i < net.num_layers(); ++i) {
    for (std::size_t s = 0; s < net.params(i).size(); ++s) {
      for (std::size_t e = 0; e < net.params(i)[s].size(); ++e) {
        const double keep = net.params(i)[s][e];
        double f[4];
        bool smooth = true;
        const double offsets[4] = {2 * h, h, -h, -2 * h};
        for (int o = 0; o < 4; ++o) {
          net.mutable_params(i)[s][e] = keep + offsets[o];
          f[o] = train_loss(net, x, y);
          smooth = smooth && kink_pattern(net, x) == base;
        }
        net.mutable_params(i)[s][e] = keep;
        if (!smooth) {
          ++rep.skipped;
          continue;
        }
        ++rep.checked;
        // Fourth-order central stencil; its O(h^4) truncation keeps the
        // high-curvature BatchNorm paths well below the tolerance.
        const double fd = (8.0 * (f[1] - f[2]) - (f[0] - f[3])) / (12.0 * h);
        rep.worst = std::max(rep.worst, rel_error(fd, br.grads.grads[i][s][e]));
      }
    }
  }
  return rep;
}

// Moves every parameter off its structured initial value (zero biases,
// unit gammas) so no unit sits exactly on a ReLU kink.
inline void jitter(Network& net, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = 0; i < net.num_layers(); ++i)
    for (auto& t : net.mutable_params(i))
      for (auto& v : t.values()) v += 0.3 * rng.normal();
}

struct FdCase {
  std::string name;
  Network net;
  Tensor x;
  std::vector<int> y;
};

/// One network per layer family, randomized by `seed`: Dense+ReLU,
/// Conv2D+MaxPool+Flatten, and BatchNorm in both modes on conv and dense
/// inputs.
inline std::vector<FdCase> fd_cases(std::uint64_t seed) {
  using namespace efl::nn;
  auto init = [&](Network net) {
    Rng rng(seed);
    net.initialize(rng);
    jitter(net, seed + 7);
    return net;
  };
  std::vector<FdCase> out;
  out.push_back({"dense_relu", init(small_mlp(5, 6, 3)), random_tensor({4, 5}, seed + 100),
                 random_labels(4, 3, seed)});
  out.push_back({"conv_pool_flatten",
                 init(Network({2, 5, 5}, {{"conv", Conv2D{2, 3, 3, 2, 1}, ""},
                                          {"pool", MaxPool{2, 1}, ""},
                                          {"flat", Flatten{}, ""},
                                          {"fc", Dense{12, 4}, ""},
                                          {"loss", SoftmaxCrossEntropy{}, ""}})),
                 random_tensor({3, 2, 5, 5}, seed + 200), random_labels(3, 4, seed)});
  for (BnMode mode : {BnMode::Global, BnMode::Static}) {
    out.push_back({mode == BnMode::Global ? "batchnorm_global" : "batchnorm_static",
                   init(Network({1, 3, 3}, {{"conv", Conv2D{1, 2, 3, 1, 1}, ""},
                                            {"bn", BatchNorm{2, mode}, ""},
                                            {"relu", ReLU{}, ""},
                                            {"flat", Flatten{}, ""},
                                            {"fc", Dense{18, 5}, ""},
                                            {"bn2", BatchNorm{5, mode}, ""},
                                            {"fc2", Dense{5, 3}, ""},
                                            {"loss", SoftmaxCrossEntropy{}, ""}})),
                   random_tensor({6, 1, 3, 3}, seed + 300), random_labels(6, 3, seed)});
  }
  return out;
}

}  // namespace efl::testing
