// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "efl/fedsim/client.hpp"
#include "efl/nn/network.hpp"

namespace efl::fedsim {

class AggregationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Which parameters are synchronized when clients otherwise keep local
/// models. None synchronizes nothing.
enum class SyncStrategy { FirstHalf, SecondHalf, ChannelWise, None };

std::string sync_strategy_name(SyncStrategy s);

enum class AggregationKind { EmbracingFL, FedAvg, WidthReduction, Ablation };

struct AggregationMode {
  AggregationKind kind = AggregationKind::EmbracingFL;
  SyncStrategy sync = SyncStrategy::None;  // Ablation only
};

/// Per-layer participants; every participant weighs 1 / participants.size().
struct LayerWeights {
  std::vector<std::size_t> participants;  // client ids, ascending

  std::size_t denominator() const noexcept { return participants.size(); }
  double weight() const { return 1.0 / static_cast<double>(participants.size()); }
};

struct AggregationWeights {
  std::vector<LayerWeights> layers;
};

/// Participants of each layer: the contributions that carry that layer.
AggregationWeights aggregation_weights(std::span<const Contribution> contributions,
                                       std::size_t num_layers);

/// Per element of every parameter and buffer slot: 1 if synchronized.
struct SyncMask {
  std::vector<std::vector<std::vector<char>>> params;
  std::vector<std::vector<std::vector<char>>> buffers;
};

/// FirstHalf: layers below the split index. SecondHalf: the rest.
/// ChannelWise: the first ceil(n/2) output units of every layer.
SyncMask sync_mask(const nn::Network& net, SyncStrategy strategy);

/// Averages contributions into a new global network.
///  EmbracingFL / FedAvg: each layer takes the mean over the contributions
///    that carry it; layers nobody trained keep their values.
///  WidthReduction: each scalar takes the mean over the clients whose slice
///    covers it; uncovered scalars keep their values.
///  Ablation: only the masked elements are averaged.
/// Global-mode BatchNorm running statistics are averaged with the same
/// participant sets; Static-mode statistics are left untouched. The
/// reduction runs in ascending client id order whatever the input order.
nn::Network aggregate(const nn::Network& global, std::span<const Contribution> contributions,
                      AggregationMode mode);

/// Copies the synchronized elements of `synced` into `local`.
void apply_sync(const nn::Network& synced, nn::Network& local, const SyncMask& mask);

}  // namespace efl::fedsim
