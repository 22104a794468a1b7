// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/analysis/capacity.hpp"

#include <stdexcept>

namespace efl::analysis {

double capacity(CapacityCounts sub, CapacityCounts full) {
  const std::uint64_t denom = 2 * full.p + 2 * full.a;
  if (denom == 0) throw std::invalid_argument("full model has no parameters or activations");
  return static_cast<double>(2 * sub.p + 2 * sub.a) / static_cast<double>(denom);
}

double avg_capacity(std::span<const TierShare> tiers) {
  if (tiers.empty()) throw std::invalid_argument("avg_capacity needs at least one tier");
  double weighted = 0.0;
  std::uint64_t total = 0;
  for (const auto& t : tiers) {
    if (t.count == 0) throw std::invalid_argument("tier counts must be positive");
    weighted += t.capacity * static_cast<double>(t.count);
    total += t.count;
  }
  return weighted / static_cast<double>(total);
}

CapacityCounts count_model(const nn::Network& net, std::size_t from_layer,
                           std::size_t batch) {
  return {net.parameter_count(from_layer), net.activation_count(from_layer, batch)};
}

}  // namespace efl::analysis
