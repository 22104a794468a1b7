// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "efl/tensor.hpp"

namespace efl::data {

/// Samples (N x ...) with integer labels in [0, num_classes).
struct Dataset {
  Tensor samples;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  /// Per-sample shape (samples.shape() without the leading N).
  Shape sample_shape() const;
  /// Throws std::invalid_argument if the invariants do not hold.
  void validate() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  /// First `n` samples (or all if fewer).
  Dataset head(std::size_t n) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
};

/// Gaussian blobs: one N(0, 9 I) mean per class, unit within-class variance,
/// samples ordered by class. Deterministic per seed.
Dataset synth_dataset(int num_classes, std::size_t n_per_class, std::size_t dim,
                      std::uint64_t seed);

/// Knobs for the synthetic seven-segment digit images.
struct DigitStyle {
  std::size_t side = 14;       // square canvas edge in pixels
  double pixel_noise = 0.2;    // std-dev of additive Gaussian pixel noise
  double drop_segment = 0.01;  // probability a lit segment is missing
  double extra_segment = 0.01; // probability an unlit segment is drawn
};

/// Ten classes of jittered, slanted seven-segment glyphs on a 1 x side x side
/// canvas with values in [0,1], in random class order. Deterministic per seed.
Dataset synth_digits(std::size_t count, std::uint64_t seed, DigitStyle style = {});

}  // namespace efl::data
