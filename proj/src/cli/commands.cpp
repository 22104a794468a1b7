// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/cli/commands.hpp"

#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <regex>
#include <stdexcept>

#include "efl/analysis/capacity.hpp"
#include "efl/analysis/svcca.hpp"
#include "efl/data/idx.hpp"
#include "efl/data/partition.hpp"
#include "efl/fedsim/width.hpp"
#include "efl/nn/checkpoint.hpp"
#include "efl/nn/optimizer.hpp"

namespace efl::cli {
namespace {

using nlohmann::json;

std::pair<data::Dataset, data::Dataset> load_datasets(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  switch (d.kind) {
    case DatasetKind::SyntheticDigits:
      return {data::synth_digits(d.train_count, derive_seed(c.seeds.data, 1), d.style),
              data::synth_digits(d.test_count, derive_seed(c.seeds.data, 2), d.style)};
    case DatasetKind::Gaussian: {
      // One draw so train and test share class means; split per class.
      const std::size_t per = d.train_per_class + d.test_per_class;
      const auto all = data::synth_dataset(d.num_classes, per, d.dim, c.seeds.data);
      std::vector<std::size_t> tr, te;
      for (std::size_t i = 0; i < all.size(); ++i)
        (i % per < d.train_per_class ? tr : te).push_back(i);
      return {all.subset(tr), all.subset(te)};
    }
    case DatasetKind::Idx: {
      auto train = data::load_idx(d.train_images, d.train_labels);
      auto test = data::load_idx(d.test_images, d.test_labels);
      if (d.train_limit > 0) train = train.head(d.train_limit);
      if (d.test_limit > 0) test = test.head(d.test_limit);
      return {std::move(train), std::move(test)};
    }
  }
  throw std::logic_error("unhandled dataset kind");
}

std::vector<std::vector<std::size_t>> iid_partition(std::size_t n, std::size_t clients,
                                                    std::uint64_t seed) {
  if (clients == 0 || clients > n) {
    throw std::invalid_argument("cannot split " + std::to_string(n) + " samples over " +
                                std::to_string(clients) + " clients");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out(clients);
  for (std::size_t c = 0; c < clients; ++c) {
    const std::size_t lo = n * c / clients, hi = n * (c + 1) / clients;
    out[c].assign(order.begin() + static_cast<std::ptrdiff_t>(lo),
                  order.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return out;
}

fedsim::Strategy tier_strategy(const ExperimentConfig& c, std::size_t tier_index,
                               const nn::Network& net) {
  const TierSpec& t = c.tiers[tier_index];
  const std::string path = "roster.tiers[" + std::to_string(tier_index) + "]";
  if (t.tier == fedsim::Tier::Strong) return fedsim::FullTraining{};
  switch (c.mode) {
    case fedsim::RunMode::EmbracingFL:
      if (!t.split_index) throw ConfigError(path + ".split_index", "required in embracing mode");
      if (*t.split_index >= net.num_layers() || !net.is_block_boundary(*t.split_index)) {
        throw ConfigError(path + ".split_index",
                          std::to_string(*t.split_index) +
                              " is not a block boundary inside the model");
      }
      return fedsim::SuffixTraining{*t.split_index};
    case fedsim::RunMode::WidthReduction:
      if (!t.keep_fraction) {
        throw ConfigError(path + ".keep_fraction", "required in width_reduction mode");
      }
      return fedsim::WidthReducedTraining{*t.keep_fraction};
    case fedsim::RunMode::FedAvg:
    case fedsim::RunMode::Ablation:
      return fedsim::FullTraining{};
  }
  return fedsim::FullTraining{};
}

}  // namespace

Experiment build_experiment(const ExperimentConfig& config, std::size_t parallel_clients,
                            const std::optional<std::filesystem::path>& out_dir) {
  auto [train, test] = load_datasets(config);
  nn::Network net = nn::network_from_json(config.model, &config.bn_mode);
  if (net.input_shape() != train.sample_shape()) {
    throw ConfigError("model.input_shape", "model expects " + shape_str(net.input_shape()) +
                                               " but the dataset provides " +
                                               shape_str(train.sample_shape()));
  }
  if (static_cast<int>(net.num_classes()) < train.num_classes) {
    throw ConfigError("model.layers", "model has " + std::to_string(net.num_classes()) +
                                          " outputs for " + std::to_string(train.num_classes) +
                                          " classes");
  }
  Rng init(config.seeds.init);
  net.initialize(init);

  const std::size_t m = config.num_clients();
  if (m > train.size()) {
    throw ConfigError("roster.tiers", std::to_string(m) + " clients exceed the " +
                                          std::to_string(train.size()) + " training samples");
  }
  const std::uint64_t part_seed = derive_seed(config.seeds.data, 3);
  std::vector<std::vector<std::size_t>> shards =
      config.partition.kind == PartitionKind::Dirichlet
          ? data::dirichlet_partition(train, m, config.partition.alpha, part_seed).assignments
          : iid_partition(train.size(), m, part_seed);

  std::vector<fedsim::ClientProfile> roster;
  for (std::size_t t = 0; t < config.tiers.size(); ++t) {
    const fedsim::Strategy strategy = tier_strategy(config, t, net);
    for (std::size_t i = 0; i < config.tiers[t].count; ++i) {
      fedsim::ClientProfile p;
      p.id = roster.size();
      p.tier = config.tiers[t].tier;
      p.strategy = strategy;
      p.shard = shards[p.id];
      p.seed_stream = p.id;
      roster.push_back(std::move(p));
    }
  }

  fedsim::SimulationConfig sim;
  sim.mode = config.mode;
  sim.sync = config.sync;
  sim.tau = config.tau;
  sim.batch_size = config.batch_size;
  sim.lr = config.lr;
  sim.momentum = config.momentum;
  sim.weight_decay = config.weight_decay;
  sim.sample_fraction = config.sample_fraction;
  sim.seeds = config.seeds;
  sim.parallel_clients = std::max<std::size_t>(1, parallel_clients);
  sim.svcca = config.svcca;
  sim.cache.chunk = config.cache_chunk;
  if (out_dir) {
    if (config.cache_spill) sim.cache.spill_dir = *out_dir / "cache";
    if (config.checkpoint_every > 0) {
      sim.checkpoint_every = config.checkpoint_every;
      sim.checkpoint_dir = *out_dir / "checkpoints";
    }
  }
  return {std::move(train), std::move(test), std::move(net), std::move(roster), sim};
}

json capacity_report(const ExperimentConfig& config, const Experiment& e) {
  const auto full = analysis::count_model(e.global, 0, config.batch_size);
  json tiers = json::array();
  std::vector<analysis::TierShare> shares;
  std::size_t first = 0;
  for (const auto& t : config.tiers) {
    const auto& strategy = e.roster[first].strategy;
    analysis::CapacityCounts sub = full;
    if (const auto* s = std::get_if<fedsim::SuffixTraining>(&strategy)) {
      sub = analysis::count_model(e.global, s->split_index, config.batch_size);
    } else if (const auto* w = std::get_if<fedsim::WidthReducedTraining>(&strategy)) {
      sub = analysis::count_model(fedsim::width_reduce(e.global, w->keep_fraction).subnet, 0,
                                  config.batch_size);
    }
    const double cap = analysis::capacity(sub, full);
    tiers.push_back({{"tier", fedsim::tier_name(t.tier)},
                     {"count", t.count},
                     {"strategy", fedsim::strategy_name(strategy)},
                     {"parameters", sub.p},
                     {"activations", sub.a},
                     {"capacity", cap}});
    shares.push_back({cap, t.count});
    first += t.count;
  }
  return {{"full_parameters", full.p},
          {"full_activations", full.a},
          {"batch_size", config.batch_size},
          {"tiers", tiers},
          {"avg_capacity", analysis::avg_capacity(shares)}};
}

void run_command(const RunOptions& options, std::ostream& log) {
  ExperimentConfig config = load_config(options.config_path);
  for (const auto& o : options.seed_overrides) apply_seed_override(config, o);
  std::filesystem::create_directories(options.out_dir);
  if (config.cache_spill) std::filesystem::create_directories(options.out_dir / "cache");

  Experiment e = build_experiment(config, options.parallel_clients, options.out_dir);
  const json echo = to_json(config);
  {
    std::ofstream out(options.out_dir / "config_echo.json", std::ios::trunc);
    out << echo.dump(2) << '\n';
  }
  const json capacity = capacity_report(config, e);
  {
    std::ofstream out(options.out_dir / "capacity.json", std::ios::trunc);
    out << capacity.dump(2) << '\n';
  }

  json lr_check = nullptr;
  if (config.l_max) {
    const auto check = nn::check_lr_constraint(config.lr.initial, config.tau, *config.l_max);
    lr_check = {{"l_max", *config.l_max}, {"bound", check.bound}, {"satisfied", check.satisfied}};
    if (!check.satisfied) {
      log << "warning: lr " << fedsim::format_real(config.lr.initial)
          << " exceeds the convergence bound " << fedsim::format_real(check.bound)
          << " for tau=" << config.tau << ", L=" << fedsim::format_real(*config.l_max) << '\n';
    }
  }

  fedsim::Simulator sim(std::move(e.global), std::move(e.roster), e.train, e.test, e.sim);
  const std::size_t every = std::max<std::size_t>(1, config.rounds / 10);
  for (std::size_t r = 0; r < config.rounds; ++r) {
    const auto& m = sim.run_round();
    if (m.round % every == 0 || m.round == config.rounds) {
      log << "round " << m.round << '/' << config.rounds << "  loss "
          << fedsim::format_real(m.global_loss) << "  accuracy "
          << fedsim::format_real(m.global_accuracy) << '\n';
    }
  }

  const auto& history = sim.history();
  fedsim::write_metrics_csv(options.out_dir / "metrics.csv", history);
  if (config.svcca.enabled) fedsim::write_svcca_csv(options.out_dir / "svcca.csv", history);

  json targets = json::object();
  for (double t : config.targets) {
    const auto hit = fedsim::rounds_to_target(history, t);
    targets[json(t).dump()] = hit ? json(*hit) : json(nullptr);
  }
  double best = 0.0;
  for (const auto& m : history) best = std::max(best, m.global_accuracy);
  const json summary = {{"final_accuracy", history.back().global_accuracy},
                        {"final_loss", history.back().global_loss},
                        {"best_accuracy", best},
                        {"rounds", config.rounds},
                        {"num_clients", config.num_clients()},
                        {"rounds_to_target", targets},
                        {"avg_capacity", capacity.at("avg_capacity")},
                        {"lr_check", lr_check},
                        {"seeds", echo.at("seeds")},
                        {"config", echo}};
  std::ofstream out(options.out_dir / "summary.json", std::ios::trunc);
  out << summary.dump(2) << '\n';
}

std::vector<SvccaRow> svcca_series(const std::filesystem::path& dir,
                                   const std::filesystem::path& eval_images, std::size_t k,
                                   std::size_t eval_count) {
  if (k == 0) throw std::invalid_argument("--k must be at least 1");
  if (!std::filesystem::is_directory(dir)) {
    throw std::invalid_argument("checkpoint directory " + dir.string() + " does not exist");
  }
  static const std::regex pattern(R"(round_(\d+)_client_(\d+)\.ckpt)");
  std::map<std::size_t, std::map<std::size_t, std::filesystem::path>> rounds;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch match;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, match, pattern)) continue;
    rounds[std::stoull(match[1].str())][std::stoull(match[2].str())] = entry.path();
  }
  if (rounds.empty()) {
    throw std::invalid_argument("no round_<r>_client_<id>.ckpt files in " + dir.string());
  }
  for (const auto& [r, files] : rounds) {
    if (files.size() < 2) {
      throw std::invalid_argument("round " + std::to_string(r) +
                                  " has a single checkpoint; pairwise SVCCA needs two");
    }
  }
  Tensor probes = data::load_idx_images(eval_images);
  if (eval_count > 0 && eval_count < probes.dim(0)) probes = probes.slice_rows(0, eval_count);

  std::vector<SvccaRow> rows;
  for (const auto& [r, files] : rounds) {
    std::vector<nn::Network> nets;
    for (const auto& [id, path] : files) {
      try {
        nets.push_back(nn::load_network(path));
      } catch (const std::exception& e) {
        throw std::runtime_error("cannot read checkpoint " + path.string() + ": " + e.what());
      }
      if (nets.back().input_shape() != Shape(probes.shape().begin() + 1, probes.shape().end())) {
        throw std::invalid_argument("checkpoint " + path.string() + " expects input " +
                                    shape_str(nets.back().input_shape()));
      }
    }
    const auto layers = analysis::weight_layers(nets.front());
    std::vector<std::vector<analysis::ActivationMatrix>> acts;
    for (const auto& n : nets) {
      if (analysis::weight_layers(n) != layers) {
        throw std::invalid_argument("round " + std::to_string(r) +
                                    " checkpoints have different layer structures");
      }
      acts.push_back(analysis::layer_activations(n, probes, layers));
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      std::vector<analysis::ActivationMatrix> per_client;
      for (const auto& a : acts) per_client.push_back(a[l]);
      rows.push_back({r, nets.front().layer(layers[l]).name,
                      analysis::pairwise_max_svcca(per_client, k)});
    }
  }
  return rows;
}

void write_svcca_rows(std::ostream& out, const std::vector<SvccaRow>& rows) {
  out << "round,layer,max_svcca\n";
  for (const auto& r : rows)
    out << r.round << ',' << r.layer << ',' << fedsim::format_real(r.max_svcca) << '\n';
}

}  // namespace efl::cli
