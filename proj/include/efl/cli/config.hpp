// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "efl/data/dataset.hpp"
#include "efl/fedsim/simulator.hpp"
#include "efl/nn/network.hpp"

namespace efl::cli {

/// Invalid configuration; the message starts with the offending field path.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& problem)
      : std::invalid_argument(field + ": " + problem), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class DatasetKind { SyntheticDigits, Gaussian, Idx };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::SyntheticDigits;
  // synthetic_digits
  std::size_t train_count = 4000;
  std::size_t test_count = 1000;
  data::DigitStyle style;
  // gaussian
  int num_classes = 10;
  std::size_t train_per_class = 100;
  std::size_t test_per_class = 50;
  std::size_t dim = 20;
  // idx
  std::string train_images, train_labels, test_images, test_labels;
  std::size_t train_limit = 0;  // 0 keeps everything
  std::size_t test_limit = 0;
};

enum class PartitionKind { Dirichlet, Iid };

struct PartitionSpec {
  PartitionKind kind = PartitionKind::Dirichlet;
  double alpha = 0.1;
};

struct TierSpec {
  fedsim::Tier tier = fedsim::Tier::Strong;
  std::size_t count = 0;
  std::optional<std::size_t> split_index;  // used in embracing mode
  std::optional<double> keep_fraction;     // used in width_reduction mode
};

struct ExperimentConfig {
  DatasetSpec dataset;
  PartitionSpec partition;
  nlohmann::json model;  // architecture description
  std::vector<TierSpec> tiers;
  fedsim::RunMode mode = fedsim::RunMode::EmbracingFL;
  fedsim::SyncStrategy sync = fedsim::SyncStrategy::None;
  std::size_t rounds = 1;
  int tau = 10;
  std::size_t batch_size = 32;
  fedsim::LrSchedule lr;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double sample_fraction = 1.0;
  fedsim::Seeds seeds;
  nn::BnMode bn_mode = nn::BnMode::Global;
  fedsim::SvccaSettings svcca;
  std::optional<double> l_max;
  std::vector<double> targets;
  std::size_t checkpoint_every = 0;
  std::size_t cache_chunk = 256;
  bool cache_spill = false;

  std::size_t num_clients() const;
};

/// Parses and validates; unspecified fields take the documented defaults.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Every field, defaults included; parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ExperimentConfig& c);

/// Applies "data=7"-style overrides to the named seeds.
void apply_seed_override(ExperimentConfig& c, const std::string& assignment);

}  // namespace efl::cli
