// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "efl/cli/config.hpp"
#include "efl/data/dataset.hpp"
#include "efl/fedsim/simulator.hpp"
#include "efl/nn/network.hpp"

namespace efl::cli {

/// Everything a run needs, built deterministically from the config seeds.
struct Experiment {
  data::Dataset train;
  data::Dataset test;
  nn::Network global;
  std::vector<fedsim::ClientProfile> roster;
  fedsim::SimulationConfig sim;
};

/// `out_dir` receives checkpoints and spilled caches when those are enabled.
Experiment build_experiment(const ExperimentConfig& config, std::size_t parallel_clients = 1,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Per-tier capacities of the configured roster and their client-weighted mean.
nlohmann::json capacity_report(const ExperimentConfig& config, const Experiment& experiment);

struct RunOptions {
  std::string config_path;
  std::filesystem::path out_dir = "out";
  std::size_t parallel_clients = 1;
  std::vector<std::string> seed_overrides;
};

/// Writes metrics.csv, summary.json, config_echo.json, capacity.json and,
/// when enabled, svcca.csv. Progress goes to `log`.
void run_command(const RunOptions& options, std::ostream& log);

struct SvccaRow {
  std::size_t round = 0;
  std::string layer;
  double max_svcca = 0.0;
};

/// Pairwise-max SVCCA per weight layer for every round tag in `dir`, from
/// files named round_<r>_client_<id>.ckpt, probed with the first
/// `eval_count` images of an IDX image file.
std::vector<SvccaRow> svcca_series(const std::filesystem::path& dir,
                                   const std::filesystem::path& eval_images, std::size_t k,
                                   std::size_t eval_count = 500);

void write_svcca_rows(std::ostream& out, const std::vector<SvccaRow>& rows);

}  // namespace efl::cli
