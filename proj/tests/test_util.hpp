// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "efl/nn/network.hpp"
#include "efl/rng.hpp"
#include "efl/tensor.hpp"

namespace efl::testing {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

inline std::vector<int> random_labels(std::size_t n, int classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> out(n);
  for (auto& l : out) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return out;
}

/// |a-b| / max(|a|, |b|, floor); the floor keeps near-zero pairs from
/// dominating.
inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Conv-BN-ReLU-pool feature block followed by a dense head.
inline nn::Network small_cnn(nn::BnMode bn = nn::BnMode::Global) {
  using namespace efl::nn;
  std::vector<LayerSpec> layers = {
      {"conv1", Conv2D{1, 3, 3, 1, 1}, "b1"},
      {"bn1", BatchNorm{3, bn}, "b1"},
      {"relu1", ReLU{}, "b1"},
      {"pool1", MaxPool{2, 2}, "b1"},
      {"conv2", Conv2D{3, 4, 3, 1, 1}, "b2"},
      {"bn2", BatchNorm{4, bn}, "b2"},
      {"relu2", ReLU{}, "b2"},
      {"flatten", Flatten{}, "b3"},
      {"fc1", Dense{16, 8}, "b3"},
      {"relu3", ReLU{}, "b3"},
      {"fc2", Dense{8, 3}, "b4"},
      {"loss", SoftmaxCrossEntropy{}, "b4"},
  };
  return Network({1, 4, 4}, std::move(layers), 7);
}

/// Two hidden dense layers on flat inputs.
inline nn::Network small_mlp(std::size_t in = 5, std::size_t hidden = 6, std::size_t classes = 3) {
  using namespace efl::nn;
  std::vector<LayerSpec> layers = {
      {"fc1", Dense{in, hidden}, ""},     {"relu1", ReLU{}, ""},
      {"fc2", Dense{hidden, hidden}, ""}, {"relu2", ReLU{}, ""},
      {"fc3", Dense{hidden, classes}, ""}, {"loss", SoftmaxCrossEntropy{}, ""},
  };
  return Network({in}, std::move(layers), 2);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("efl_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace efl::testing
