// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/fedsim/aggregate.hpp"

#include <algorithm>
#include <optional>

namespace efl::fedsim {
namespace {

std::size_t output_units(const nn::LayerKind& kind) {
  if (const auto* d = std::get_if<nn::Dense>(&kind)) return d->out;
  if (const auto* c = std::get_if<nn::Conv2D>(&kind)) return c->out_ch;
  if (const auto* b = std::get_if<nn::BatchNorm>(&kind)) return b->channels;
  return 0;
}

bool static_bn(const nn::LayerKind& kind) {
  const auto* b = std::get_if<nn::BatchNorm>(&kind);
  return b != nullptr && b->mode == nn::BnMode::Static;
}

// Marks rows [0, units) along the leading axis.
std::vector<char> leading_mask(const Tensor& t, std::size_t units, bool on) {
  std::vector<char> m(t.size(), 0);
  if (!on || t.size() == 0) return m;
  const std::size_t per_row = t.size() / t.dim(0);
  std::fill(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(units * per_row), 1);
  return m;
}

struct Accumulator {
  std::vector<std::vector<std::vector<double>>> sum;
  std::vector<std::vector<std::vector<std::size_t>>> count;
};

Accumulator make_accumulator(const nn::Network& net, bool buffers) {
  Accumulator a;
  a.sum.resize(net.num_layers());
  a.count.resize(net.num_layers());
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const auto& slots = buffers ? net.buffers(i) : net.params(i);
    for (const auto& t : slots) {
      a.sum[i].emplace_back(t.size(), 0.0);
      a.count[i].emplace_back(t.size(), 0);
    }
  }
  return a;
}

void check_slots(const Contribution& c, std::size_t layer, const std::vector<Tensor>& got,
                 const std::vector<Tensor>& want, const IndexMap* map, bool buffers,
                 const std::string& layer_name) {
  const std::string where =
      "client " + std::to_string(c.client_id) + ", layer " + layer_name;
  if (got.size() != want.size()) throw AggregationError(where + ": slot count mismatch");
  for (std::size_t s = 0; s < got.size(); ++s) {
    if (map != nullptr) {
      const auto& idx = buffers ? map->buffers.at(layer) : map->params.at(layer);
      if (idx.size() != got.size() || idx[s].size() != got[s].size()) {
        throw AggregationError(where + ": sub-network slice does not match its index map");
      }
      for (auto g : idx[s])
        if (g >= want[s].size()) throw AggregationError(where + ": index map out of range");
    } else if (got[s].shape() != want[s].shape()) {
      throw AggregationError(where + ": expected shape " + shape_str(want[s].shape()) +
                             ", got " + shape_str(got[s].shape()));
    }
  }
}

void accumulate(Accumulator& acc, std::size_t layer, const std::vector<Tensor>& slots,
                const std::vector<std::vector<std::size_t>>* idx,
                const std::vector<std::vector<char>>* mask) {
  for (std::size_t s = 0; s < slots.size(); ++s) {
    auto& sum = acc.sum[layer][s];
    auto& count = acc.count[layer][s];
    for (std::size_t e = 0; e < slots[s].size(); ++e) {
      const std::size_t g = idx != nullptr ? (*idx)[s][e] : e;
      if (mask != nullptr && !(*mask)[s][g]) continue;
      sum[g] += slots[s][e];
      ++count[g];
    }
  }
}

void finish(const Accumulator& acc, std::size_t layer, std::vector<Tensor>& out) {
  for (std::size_t s = 0; s < out.size(); ++s)
    for (std::size_t e = 0; e < out[s].size(); ++e)
      if (acc.count[layer][s][e] > 0)
        out[s][e] = acc.sum[layer][s][e] / static_cast<double>(acc.count[layer][s][e]);
}

}  // namespace

std::string sync_strategy_name(SyncStrategy s) {
  switch (s) {
    case SyncStrategy::FirstHalf: return "first_half";
    case SyncStrategy::SecondHalf: return "second_half";
    case SyncStrategy::ChannelWise: return "channel_wise";
    case SyncStrategy::None: return "none";
  }
  return "unknown";
}

AggregationWeights aggregation_weights(std::span<const Contribution> contributions,
                                       std::size_t num_layers) {
  AggregationWeights w;
  w.layers.resize(num_layers);
  for (const auto& c : contributions) {
    for (std::size_t i = 0; i < num_layers && i < c.layers.size(); ++i)
      if (c.layers[i]) w.layers[i].participants.push_back(c.client_id);
  }
  for (auto& l : w.layers) std::sort(l.participants.begin(), l.participants.end());
  return w;
}

SyncMask sync_mask(const nn::Network& net, SyncStrategy strategy) {
  SyncMask m;
  m.params.resize(net.num_layers());
  m.buffers.resize(net.num_layers());
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    bool whole = false;
    std::size_t units = 0;
    const std::size_t width = output_units(net.layer(i).kind);
    switch (strategy) {
      case SyncStrategy::FirstHalf: whole = i < net.split_index(); break;
      case SyncStrategy::SecondHalf: whole = i >= net.split_index(); break;
      case SyncStrategy::ChannelWise: units = (width + 1) / 2; break;
      case SyncStrategy::None: break;
    }
    if (whole) units = width;
    for (const auto& t : net.params(i)) m.params[i].push_back(leading_mask(t, units, units > 0));
    for (const auto& t : net.buffers(i)) m.buffers[i].push_back(leading_mask(t, units, units > 0));
  }
  return m;
}

nn::Network aggregate(const nn::Network& global, std::span<const Contribution> contributions,
                      AggregationMode mode) {
  if (contributions.empty()) throw AggregationError("aggregate needs at least one contribution");

  std::vector<const Contribution*> ordered;
  for (const auto& c : contributions) {
    if (c.layers.size() != global.num_layers()) {
      throw AggregationError("client " + std::to_string(c.client_id) +
                             " contribution depth does not match the global network");
    }
    if (c.index_map && mode.kind != AggregationKind::WidthReduction) {
      throw AggregationError("client " + std::to_string(c.client_id) +
                             " sent a width-reduced update outside width-reduction mode");
    }
    ordered.push_back(&c);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Contribution* a, const Contribution* b) {
                     return a->client_id < b->client_id;
                   });

  std::optional<SyncMask> mask;
  if (mode.kind == AggregationKind::Ablation) mask = sync_mask(global, mode.sync);

  Accumulator params = make_accumulator(global, false);
  Accumulator buffers = make_accumulator(global, true);
  for (const Contribution* c : ordered) {
    const IndexMap* map = c->index_map ? &*c->index_map : nullptr;
    for (std::size_t i = 0; i < global.num_layers(); ++i) {
      if (!c->layers[i]) continue;
      const auto& update = *c->layers[i];
      const std::string& name = global.layer(i).name;
      check_slots(*c, i, update.params, global.params(i), map, false, name);
      accumulate(params, i, update.params, map ? &map->params[i] : nullptr,
                 mask ? &mask->params[i] : nullptr);
      if (static_bn(global.layer(i).kind)) continue;
      check_slots(*c, i, update.buffers, global.buffers(i), map, true, name);
      accumulate(buffers, i, update.buffers, map ? &map->buffers[i] : nullptr,
                 mask ? &mask->buffers[i] : nullptr);
    }
  }

  nn::Network out = global;
  for (std::size_t i = 0; i < out.num_layers(); ++i) {
    if (!out.params(i).empty()) finish(params, i, out.mutable_params(i));
    if (!out.buffers(i).empty()) finish(buffers, i, out.mutable_buffers(i));
  }
  return out;
}

void apply_sync(const nn::Network& synced, nn::Network& local, const SyncMask& mask) {
  for (std::size_t i = 0; i < local.num_layers(); ++i) {
    if (!local.params(i).empty()) {
      auto& p = local.mutable_params(i);
      for (std::size_t s = 0; s < p.size(); ++s)
        for (std::size_t e = 0; e < p[s].size(); ++e)
          if (mask.params[i][s][e]) p[s][e] = synced.params(i)[s][e];
    }
    auto& b = local.mutable_buffers(i);
    for (std::size_t s = 0; s < b.size(); ++s)
      for (std::size_t e = 0; e < b[s].size(); ++e)
        if (mask.buffers[i][s][e]) b[s][e] = synced.buffers(i)[s][e];
  }
}

}  // namespace efl::fedsim
