// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/data/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "efl/rng.hpp"

namespace efl::data {

nlohmann::json PartitionPlan::to_json() const {
  nlohmann::json clients = nlohmann::json::object();
  for (std::size_t c = 0; c < assignments.size(); ++c)
    clients[std::to_string(c)] = assignments[c];
  return {{"alpha", alpha}, {"seed", seed}, {"clients", std::move(clients)}};
}

std::vector<std::size_t> largest_remainder(const std::vector<double>& p,
                                           std::size_t total) {
  std::vector<std::size_t> counts(p.size());
  std::vector<double> rem(p.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double exact = p[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  // Floating error can push the floor sum past `total`; trim from the back.
  for (std::size_t i = p.size(); assigned > total && i-- > 0;) {
    const std::size_t take = std::min(counts[i], assigned - total);
    counts[i] -= take;
    assigned -= take;
  }
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < total; k = (k + 1) % order.size()) {
    ++counts[order[k]];
    ++assigned;
  }
  return counts;
}

PartitionPlan dirichlet_partition(const Dataset& ds, std::size_t num_clients,
                                  double alpha, std::uint64_t seed) {
  if (num_clients == 0) throw std::invalid_argument("num_clients must be at least 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (num_clients > ds.size()) {
    throw std::invalid_argument("num_clients " + std::to_string(num_clients) +
                                " exceeds dataset size " + std::to_string(ds.size()));
  }
  Rng rng(seed);
  PartitionPlan plan{std::vector<std::vector<std::size_t>>(num_clients), alpha, seed};

  std::vector<std::vector<std::size_t>> by_label(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.size(); ++i)
    by_label[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  for (auto& members : by_label) {
    if (members.empty()) continue;
    rng.shuffle(std::span<std::size_t>(members));
    const auto p = rng.dirichlet(num_clients, alpha);
    const auto counts = largest_remainder(p, members.size());
    std::size_t pos = 0;
    for (std::size_t c = 0; c < num_clients; ++c) {
      auto& shard = plan.assignments[c];
      shard.insert(shard.end(), members.begin() + static_cast<std::ptrdiff_t>(pos),
                   members.begin() + static_cast<std::ptrdiff_t>(pos + counts[c]));
      pos += counts[c];
    }
  }

  for (std::size_t c = 0; c < num_clients; ++c) {
    if (!plan.assignments[c].empty()) continue;
    std::size_t largest = 0;
    for (std::size_t d = 1; d < num_clients; ++d)
      if (plan.assignments[d].size() > plan.assignments[largest].size()) largest = d;
    plan.assignments[c].push_back(plan.assignments[largest].back());
    plan.assignments[largest].pop_back();
  }
  return plan;
}

}  // namespace efl::data
