// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "efl/data/dataset.hpp"
#include "efl/fedsim/aggregate.hpp"
#include "efl/fedsim/client.hpp"
#include "efl/nn/network.hpp"

namespace efl::fedsim {

enum class RunMode { EmbracingFL, FedAvg, WidthReduction, Ablation };

std::string run_mode_name(RunMode m);

/// Step decay: lr(r) = initial * decay_factor^(number of decay rounds < r),
/// rounds counted from 1.
struct LrSchedule {
  double initial = 0.05;
  double decay_factor = 0.1;
  std::vector<std::size_t> decay_rounds;

  double at(std::size_t round) const;
};

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t init = 2;
  std::uint64_t rounds = 3;
  std::uint64_t clients = 4;
};

struct SvccaSettings {
  bool enabled = false;
  std::size_t k = 4;
  std::size_t every_n_rounds = 1;
  std::size_t eval_samples = 500;  // leading test samples used as probes
  std::size_t batches = 1;         // probe batches averaged per pair
};

struct SimulationConfig {
  RunMode mode = RunMode::EmbracingFL;
  SyncStrategy sync = SyncStrategy::None;  // Ablation only
  int tau = 10;
  std::size_t batch_size = 32;
  LrSchedule lr;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double sample_fraction = 1.0;
  Seeds seeds;
  std::size_t parallel_clients = 1;
  SvccaSettings svcca;
  CacheOptions cache;
  std::size_t eval_chunk = 500;
  std::size_t checkpoint_every = 0;  // 0 disables checkpoint files
  std::optional<std::filesystem::path> checkpoint_dir;
};

struct RoundMetrics {
  std::size_t round = 0;  // 1-based
  double global_loss = 0.0;
  double global_accuracy = 0.0;
  std::optional<std::map<std::string, double>> per_layer_svcca;
  std::vector<std::size_t> sampled_clients;
  double mean_client_loss = 0.0;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Mean cross-entropy and top-1 accuracy in Eval mode.
Evaluation evaluate(const nn::Network& net, const data::Dataset& ds, std::size_t chunk = 500);

/// ceil(fraction * m) distinct client positions, ascending, drawn from the
/// round stream of `seed`.
std::vector<std::size_t> sample_clients(std::size_t m, double fraction, std::uint64_t seed,
                                        std::size_t round);

/// Owns the global model, the roster and (in ablation mode) every client's
/// persistent local model. Serial and parallel runs give identical results.
class Simulator {
 public:
  Simulator(nn::Network global, std::vector<ClientProfile> roster, const data::Dataset& train,
            const data::Dataset& test, SimulationConfig config);

  const RoundMetrics& run_round();
  void run(std::size_t rounds);

  const nn::Network& global() const noexcept { return global_; }
  const std::vector<ClientProfile>& roster() const noexcept { return roster_; }
  const std::vector<RoundMetrics>& history() const noexcept { return history_; }
  /// Persistent per-client models; empty outside ablation mode.
  const std::vector<nn::Network>& local_models() const noexcept { return locals_; }

 private:
  nn::Network global_;
  std::vector<ClientProfile> roster_;
  const data::Dataset* train_;
  const data::Dataset* test_;
  SimulationConfig config_;
  std::vector<nn::Network> locals_;
  std::vector<RoundMetrics> history_;
  Tensor probes_;
};

/// Round number of the first entry with accuracy >= target.
std::optional<std::size_t> rounds_to_target(std::span<const RoundMetrics> metrics,
                                            double target);

/// round,loss,accuracy,sampled_client_ids  (ids joined by ';')
void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const RoundMetrics> metrics);
/// round,layer,max_svcca for every round that recorded SVCCA.
void write_svcca_csv(const std::filesystem::path& path, std::span<const RoundMetrics> metrics);

/// 17 significant digits, enough to round-trip any double.
std::string format_real(double v);

}  // namespace efl::fedsim
