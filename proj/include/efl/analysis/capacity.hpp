// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>

#include "efl/nn/network.hpp"

namespace efl::analysis {

/// Parameter and activation counts of a (sub-)model.
struct CapacityCounts {
  std::uint64_t p = 0;
  std::uint64_t a = 0;
};

/// Memory-footprint ratio (2 p_sub + 2 a_sub) / (2 p + 2 a), unrounded.
double capacity(CapacityCounts sub, CapacityCounts full);

struct TierShare {
  double capacity = 0.0;
  std::uint64_t count = 0;
};

/// Client-count weighted mean of tier capacities.
double avg_capacity(std::span<const TierShare> tiers);

/// Counts for the layers a client trains: layers [from_layer, end) of `net`
/// with activations taken per batch of `batch` samples.
CapacityCounts count_model(const nn::Network& net, std::size_t from_layer,
                           std::size_t batch);

}  // namespace efl::analysis
