// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

#include "efl/data/dataset.hpp"

namespace efl::data {

/// Client id -> sample indices. Shards are disjoint and non-empty.
struct PartitionPlan {
  std::vector<std::vector<std::size_t>> assignments;
  double alpha = 0.0;
  std::uint64_t seed = 0;

  std::size_t num_clients() const noexcept { return assignments.size(); }
  /// {"alpha": a, "seed": s, "clients": {"0": [...], ...}}
  nlohmann::json to_json() const;
};

/// Label-skewed split: for every label, client proportions are drawn from a
/// symmetric Dirichlet(alpha) and the label's (shuffled) samples are cut
/// into contiguous runs of largest-remainder-rounded sizes. A client left
/// with no samples takes one from the currently largest shard.
PartitionPlan dirichlet_partition(const Dataset& ds, std::size_t num_clients,
                                  double alpha, std::uint64_t seed);

/// Largest-remainder rounding of `total * p[i]`; ties go to the lower index.
std::vector<std::size_t> largest_remainder(const std::vector<double>& p,
                                           std::size_t total);

}  // namespace efl::data
