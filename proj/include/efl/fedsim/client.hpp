// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "efl/data/dataset.hpp"
#include "efl/nn/network.hpp"
#include "efl/nn/optimizer.hpp"
#include "efl/rng.hpp"

namespace efl::fedsim {

enum class Tier { Strong, Moderate, Weak };

std::string tier_name(Tier t);

/// Trains every layer.
struct FullTraining {};
/// Trains layers [split_index, L) on recorded prefix outputs.
struct SuffixTraining {
  std::size_t split_index = 0;
};
/// Trains a sub-network keeping the first ceil(keep_fraction * width) units
/// of every hidden layer.
struct WidthReducedTraining {
  double keep_fraction = 1.0;
};

using Strategy = std::variant<FullTraining, SuffixTraining, WidthReducedTraining>;

std::string strategy_name(const Strategy& s);

/// Full-model strategies: FullTraining, SuffixTraining{0},
/// WidthReducedTraining{1}.
bool trains_full_model(const Strategy& s);

struct ClientProfile {
  std::size_t id = 0;
  Tier tier = Tier::Strong;
  Strategy strategy = FullTraining{};
  std::vector<std::size_t> shard;  // sample indices into the training set
  std::uint64_t seed_stream = 0;
};

/// Checks the profile against the network it will train: suffix splits land
/// on block boundaries inside the network and keep fractions lie in (0, 1].
void validate_profile(const ClientProfile& client, const nn::Network& net);

/// Split-point outputs of a weak client's whole shard for one round.
struct ActivationCache {
  std::size_t client_id = 0;
  std::size_t round = 0;
  std::size_t split_index = 0;
  Tensor recorded;  // shard size x split-point feature shape
  std::vector<int> labels;

  /// Binary dump of `recorded` and `labels`, bit-exact.
  void save(const std::filesystem::path& path) const;
  static ActivationCache load(const std::filesystem::path& path);
};

struct CacheOptions {
  std::size_t chunk = 256;     // samples per forward chunk
  std::size_t blocks_per_step = 1;  // prefix blocks received per step
  std::optional<std::filesystem::path> spill_dir;
};

/// Streams the prefix [0, k) block group by block group over the client's
/// shard in Eval mode, recording each group's output as the next group's
/// input. Runs once per client per round; the prefix is only read.
ActivationCache multi_step_forward(const nn::Network& global, const ClientProfile& client,
                                   const data::Dataset& ds, std::size_t round,
                                   const CacheOptions& options = {});

/// Index batches drawn without replacement; the order reshuffles whenever
/// the pool is exhausted. A batch larger than the pool is the whole pool.
class BatchSampler {
 public:
  BatchSampler(std::size_t pool, std::size_t batch_size, Rng& rng);
  std::vector<std::size_t> next();

 private:
  void reshuffle();
  std::size_t pool_, batch_;
  Rng* rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

/// Trained values of one layer.
struct LayerUpdate {
  std::vector<Tensor> params;
  std::vector<Tensor> buffers;
};

/// Maps each parameter / buffer element of a width-reduced sub-network to
/// its flat index in the corresponding global tensor.
struct IndexMap {
  std::vector<std::vector<std::vector<std::size_t>>> params;   // [layer][slot][elem]
  std::vector<std::vector<std::vector<std::size_t>>> buffers;  // [layer][slot][elem]
};

/// What a client sends back: trained layers indexed by global layer.
struct Contribution {
  std::size_t client_id = 0;
  Strategy strategy = FullTraining{};
  std::vector<std::optional<LayerUpdate>> layers;  // global depth
  std::optional<IndexMap> index_map;               // width-reduced clients only
  double mean_loss = 0.0;
};

struct LocalTrainConfig {
  int tau = 10;
  std::size_t batch_size = 32;
  nn::OptimizerState optimizer{0.05, 0.9, 1e-4};
};

struct LocalTrainResult {
  Contribution contribution;
  nn::Network model;  // the network the client actually trained
};

/// Runs tau momentum-SGD steps starting from the global values of the
/// client's trainable layers, with fresh optimizer state. Suffix clients
/// train on `cache`; others on their raw shard. `forced_batches`, when
/// given, replaces the sampler (row indices into the shard / cache).
LocalTrainResult local_train(const ClientProfile& client, const nn::Network& global,
                             const data::Dataset& ds, const ActivationCache* cache,
                             const LocalTrainConfig& config, Rng& rng,
                             std::span<const std::vector<std::size_t>> forced_batches = {});

/// Layers [k, L) of `net` as a standalone network whose input is the
/// split-point activation.
nn::Network suffix_network(const nn::Network& net, std::size_t k);

/// The full-network view of a client's local model: the global network
/// with the client's trained layers substituted (width-reduced clients
/// return their sub-network).
nn::Network client_view(const nn::Network& global, const LocalTrainResult& result);

}  // namespace efl::fedsim
