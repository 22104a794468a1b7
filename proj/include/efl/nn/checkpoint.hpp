// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "efl/nn/network.hpp"

namespace efl::nn {

/// Model description: {"input_shape": [...], "split_index": k, "layers": [
///   {"type": "conv2d", "name": ..., "block": ..., "in_channels": ..., ...}]}
nlohmann::json architecture_to_json(const Network& net);
/// Builds an (uninitialized) network from `architecture_to_json` output.
/// `bn_override` replaces every BatchNorm mode when set.
Network network_from_json(const nlohmann::json& arch,
                          const BnMode* bn_override = nullptr);

struct NamedTensor {
  std::string name;  // "<layer>.<slot>", e.g. "conv1.weight"
  Tensor value;
};

struct Checkpoint {
  std::string architecture;  // JSON text
  std::vector<NamedTensor> entries;
};

/// Binary layout, little-endian:
///   "EFLCKPT1" | u32 arch_len | arch bytes | u32 count |
///   count x (u32 name_len | name | u32 rank | rank x u64 dim | f64 values)
void write_checkpoint(const std::filesystem::path& path, const Network& net);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Rebuilds the network described by a checkpoint and loads its values.
Network load_network(const std::filesystem::path& path);

}  // namespace efl::nn
