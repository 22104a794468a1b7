// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/fedsim/client.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "efl/fedsim/width.hpp"

namespace efl::fedsim {
namespace {

template <typename... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <typename... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

constexpr char kCacheMagic[8] = {'E', 'F', 'L', 'C', 'A', 'C', 'H', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) {
    throw FormatError("activation cache " + path.string() + " is truncated");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void copy_layers(const nn::Network& from, std::size_t from_begin, nn::Network& to,
                 std::size_t to_begin, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    to.mutable_params(to_begin + i) = from.params(from_begin + i);
    to.mutable_buffers(to_begin + i) = from.buffers(from_begin + i);
  }
}

}  // namespace

std::string tier_name(Tier t) {
  switch (t) {
    case Tier::Strong: return "strong";
    case Tier::Moderate: return "moderate";
    case Tier::Weak: return "weak";
  }
  return "unknown";
}

std::string strategy_name(const Strategy& s) {
  return std::visit(Overloaded{
                        [](const FullTraining&) { return std::string("full"); },
                        [](const SuffixTraining& x) {
                          return "suffix(" + std::to_string(x.split_index) + ")";
                        },
                        [](const WidthReducedTraining& x) {
                          return "width(" + std::to_string(x.keep_fraction) + ")";
                        },
                    },
                    s);
}

bool trains_full_model(const Strategy& s) {
  if (std::holds_alternative<FullTraining>(s)) return true;
  if (const auto* x = std::get_if<SuffixTraining>(&s)) return x->split_index == 0;
  return std::get<WidthReducedTraining>(s).keep_fraction == 1.0;
}

void validate_profile(const ClientProfile& client, const nn::Network& net) {
  const std::string who = "client " + std::to_string(client.id);
  if (client.shard.empty()) throw std::invalid_argument(who + " has an empty shard");
  if (const auto* s = std::get_if<SuffixTraining>(&client.strategy)) {
    if (s->split_index >= net.num_layers()) {
      throw std::invalid_argument(who + ": split index " + std::to_string(s->split_index) +
                                  " beyond network depth " +
                                  std::to_string(net.num_layers()));
    }
    if (!net.is_block_boundary(s->split_index)) {
      throw std::invalid_argument(who + ": split index " + std::to_string(s->split_index) +
                                  " is not a block boundary");
    }
  }
  if (const auto* w = std::get_if<WidthReducedTraining>(&client.strategy)) {
    if (!(w->keep_fraction > 0.0 && w->keep_fraction <= 1.0)) {
      throw std::invalid_argument(who + ": keep_fraction must lie in (0, 1]");
    }
  }
}

void ActivationCache::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write activation cache " + path.string());
  out.write(kCacheMagic, sizeof kCacheMagic);
  put_u64(out, client_id);
  put_u64(out, round);
  put_u64(out, split_index);
  put_u64(out, recorded.rank());
  for (auto d : recorded.shape()) put_u64(out, d);
  for (double v : recorded.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  put_u64(out, labels.size());
  for (int l : labels) put_u64(out, static_cast<std::uint64_t>(static_cast<std::int64_t>(l)));
  if (!out) throw std::runtime_error("failed writing activation cache " + path.string());
}

ActivationCache ActivationCache::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open activation cache " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCacheMagic, 8) != 0) {
    throw FormatError("activation cache " + path.string() + " has a bad header");
  }
  ActivationCache c;
  c.client_id = get_u64(in, path);
  c.round = get_u64(in, path);
  c.split_index = get_u64(in, path);
  Shape shape(get_u64(in, path));
  for (auto& d : shape) d = get_u64(in, path);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = std::bit_cast<double>(get_u64(in, path));
  c.recorded = Tensor(std::move(shape), std::move(values));
  c.labels.resize(get_u64(in, path));
  for (auto& l : c.labels) l = static_cast<int>(static_cast<std::int64_t>(get_u64(in, path)));
  return c;
}

ActivationCache multi_step_forward(const nn::Network& global, const ClientProfile& client,
                                   const data::Dataset& ds, std::size_t round,
                                   const CacheOptions& options) {
  const auto* suffix = std::get_if<SuffixTraining>(&client.strategy);
  if (suffix == nullptr || suffix->split_index == 0) {
    throw std::invalid_argument("multi-step forward needs a suffix client with split >= 1");
  }
  validate_profile(client, global);
  if (options.chunk == 0 || options.blocks_per_step == 0) {
    throw std::invalid_argument("cache chunk and blocks_per_step must be positive");
  }
  const std::size_t k = suffix->split_index;

  // Block group edges inside the prefix.
  std::vector<std::size_t> edges;
  std::size_t seen = 0;
  for (auto b : global.block_boundaries()) {
    if (b == 0 || b > k) continue;
    if (++seen % options.blocks_per_step == 0 || b == k) edges.push_back(b);
  }

  Tensor current = gather_rows(ds.samples, client.shard);
  std::size_t begin = 0;
  for (auto end : edges) {
    std::vector<Tensor> parts;
    for (std::size_t c = 0; c < current.dim(0); c += options.chunk) {
      const std::size_t stop = std::min(current.dim(0), c + options.chunk);
      parts.push_back(nn::infer_range(global, current.slice_rows(c, stop), begin, end));
    }
    current = concat_rows(parts);
    begin = end;
  }

  ActivationCache cache;
  cache.client_id = client.id;
  cache.round = round;
  cache.split_index = k;
  cache.recorded = std::move(current);
  cache.labels = ds.gather_labels(client.shard);
  if (options.spill_dir) {
    const auto path = *options.spill_dir / ("cache_round_" + std::to_string(round) +
                                            "_client_" + std::to_string(client.id) + ".bin");
    cache.save(path);
    cache = ActivationCache::load(path);
  }
  return cache;
}

BatchSampler::BatchSampler(std::size_t pool, std::size_t batch_size, Rng& rng)
    : pool_(pool), batch_(std::min(batch_size, pool)), rng_(&rng), order_(pool) {
  if (pool == 0) throw std::invalid_argument("batch sampler needs a non-empty pool");
  if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  reshuffle();
}

void BatchSampler::reshuffle() {
  rng_->shuffle(std::span<std::size_t>(order_));
  pos_ = 0;
}

std::vector<std::size_t> BatchSampler::next() {
  std::vector<std::size_t> batch;
  batch.reserve(batch_);
  while (batch.size() < batch_) {
    if (pos_ == pool_) reshuffle();
    batch.push_back(order_[pos_++]);
  }
  return batch;
}

nn::Network suffix_network(const nn::Network& net, std::size_t k) {
  if (k >= net.num_layers()) {
    throw std::invalid_argument("suffix start " + std::to_string(k) + " beyond network depth");
  }
  auto specs = net.specs();
  std::vector<nn::LayerSpec> tail(specs.begin() + static_cast<std::ptrdiff_t>(k), specs.end());
  nn::Network out(net.shape_before(k), std::move(tail), 0);
  copy_layers(net, k, out, 0, out.num_layers());
  return out;
}

LocalTrainResult local_train(const ClientProfile& client, const nn::Network& global,
                             const data::Dataset& ds, const ActivationCache* cache,
                             const LocalTrainConfig& config, Rng& rng,
                             std::span<const std::vector<std::size_t>> forced_batches) {
  if (config.tau < 1) throw std::invalid_argument("tau must be at least 1");
  if (config.batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  validate_profile(client, global);

  Contribution contrib;
  contrib.client_id = client.id;
  contrib.strategy = client.strategy;
  contrib.layers.resize(global.num_layers());

  std::size_t offset = 0;
  Tensor inputs;
  std::vector<int> labels;
  auto model = [&]() -> nn::Network {
    if (const auto* s = std::get_if<SuffixTraining>(&client.strategy); s && s->split_index > 0) {
      if (cache == nullptr) {
        throw std::invalid_argument("suffix client " + std::to_string(client.id) +
                                    " needs an activation cache");
      }
      if (cache->split_index != s->split_index || cache->recorded.dim(0) != client.shard.size()) {
        throw std::invalid_argument("activation cache does not match client " +
                                    std::to_string(client.id));
      }
      offset = s->split_index;
      inputs = cache->recorded;
      labels = cache->labels;
      return suffix_network(global, offset);
    }
    inputs = gather_rows(ds.samples, client.shard);
    labels = ds.gather_labels(client.shard);
    if (const auto* w = std::get_if<WidthReducedTraining>(&client.strategy)) {
      auto reduced = width_reduce(global, w->keep_fraction);
      contrib.index_map = std::move(reduced.map);
      return std::move(reduced.subnet);
    }
    return global;
  }();

  if (!forced_batches.empty() && forced_batches.size() < static_cast<std::size_t>(config.tau)) {
    throw std::invalid_argument("forced batch list shorter than tau");
  }
  nn::OptimizerState opt(config.optimizer.lr, config.optimizer.momentum,
                         config.optimizer.weight_decay);
  BatchSampler sampler(inputs.dim(0), config.batch_size, rng);
  double loss_sum = 0.0;
  for (int t = 0; t < config.tau; ++t) {
    const std::vector<std::size_t> rows =
        forced_batches.empty() ? sampler.next() : forced_batches[static_cast<std::size_t>(t)];
    const Tensor xb = gather_rows(inputs, rows);
    std::vector<int> yb;
    yb.reserve(rows.size());
    for (auto r : rows) yb.push_back(labels.at(r));
    auto fr = nn::forward(model, xb, nn::Mode::Train);
    const auto br = nn::backward(model, fr.trace, yb, 0);
    nn::sgd_step(model, br.grads, opt);
    loss_sum += br.loss;
  }
  contrib.mean_loss = loss_sum / config.tau;

  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    contrib.layers[offset + i] = LayerUpdate{model.params(i), model.buffers(i)};
  }
  return {std::move(contrib), std::move(model)};
}

nn::Network client_view(const nn::Network& global, const LocalTrainResult& result) {
  const auto& c = result.contribution;
  if (const auto* s = std::get_if<SuffixTraining>(&c.strategy); s && s->split_index > 0) {
    nn::Network view = global;
    copy_layers(result.model, 0, view, s->split_index, result.model.num_layers());
    return view;
  }
  return result.model;
}

}  // namespace efl::fedsim
