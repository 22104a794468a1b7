// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/fedsim/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "efl/analysis/svcca.hpp"
#include "efl/nn/checkpoint.hpp"

namespace efl::fedsim {
namespace {

// Runs f(0..n-1) on up to `workers` threads. Each index writes only its own
// output slot, so the schedule does not affect results.
template <typename F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

AggregationMode aggregation_mode(const SimulationConfig& c) {
  switch (c.mode) {
    case RunMode::EmbracingFL: return {AggregationKind::EmbracingFL, SyncStrategy::None};
    case RunMode::FedAvg: return {AggregationKind::FedAvg, SyncStrategy::None};
    case RunMode::WidthReduction: return {AggregationKind::WidthReduction, SyncStrategy::None};
    case RunMode::Ablation: return {AggregationKind::Ablation, c.sync};
  }
  return {};
}

std::vector<analysis::ActivationMatrix> column_batches(const analysis::ActivationMatrix& m,
                                                       std::size_t batches) {
  const std::size_t n = m.matrix.dim(1);
  std::vector<analysis::ActivationMatrix> out;
  for (std::size_t b = 0; b < batches; ++b) {
    const std::size_t lo = n * b / batches, hi = n * (b + 1) / batches;
    Tensor part({m.matrix.dim(0), hi - lo});
    for (std::size_t r = 0; r < m.matrix.dim(0); ++r)
      for (std::size_t j = lo; j < hi; ++j) part.at(r, j - lo) = m.matrix.at(r, j);
    out.push_back({m.layer, std::move(part)});
  }
  return out;
}

std::map<std::string, double> round_svcca(std::span<const nn::Network> views,
                                          const Tensor& probes, const SvccaSettings& s) {
  const auto layers = analysis::weight_layers(views.front());
  std::vector<std::vector<std::vector<analysis::ActivationMatrix>>> acts;  // client, layer, batch
  for (const auto& v : views) {
    auto per_layer = analysis::layer_activations(v, probes, layers);
    std::vector<std::vector<analysis::ActivationMatrix>> split;
    for (const auto& m : per_layer) split.push_back(column_batches(m, s.batches));
    acts.push_back(std::move(split));
  }
  std::map<std::string, double> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    double best = 0.0;
    for (std::size_t a = 0; a < views.size(); ++a)
      for (std::size_t b = a + 1; b < views.size(); ++b)
        best = std::max(best, analysis::batched_svcca(acts[a][l], acts[b][l], s.k));
    out[views.front().layer(layers[l]).name] = best;
  }
  return out;
}

void check_roster(std::vector<ClientProfile>& roster, const nn::Network& global,
                  RunMode mode) {
  if (roster.empty()) throw std::invalid_argument("roster must contain at least one client");
  std::vector<std::size_t> ids;
  for (auto& c : roster) {
    ids.push_back(c.id);
    if (mode == RunMode::FedAvg || mode == RunMode::Ablation) c.strategy = FullTraining{};
    const bool suffix = std::holds_alternative<SuffixTraining>(c.strategy) &&
                        std::get<SuffixTraining>(c.strategy).split_index > 0;
    const bool width = std::holds_alternative<WidthReducedTraining>(c.strategy);
    if (mode == RunMode::EmbracingFL && width) {
      throw std::invalid_argument("client " + std::to_string(c.id) +
                                  ": width-reduced training needs width_reduction mode");
    }
    if (mode == RunMode::WidthReduction && suffix) {
      throw std::invalid_argument("client " + std::to_string(c.id) +
                                  ": suffix training needs embracing mode");
    }
    validate_profile(c, global);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw std::invalid_argument("client ids must be unique");
  }
}

}  // namespace

std::string run_mode_name(RunMode m) {
  switch (m) {
    case RunMode::EmbracingFL: return "embracing";
    case RunMode::FedAvg: return "fedavg";
    case RunMode::WidthReduction: return "width_reduction";
    case RunMode::Ablation: return "ablation";
  }
  return "unknown";
}

double LrSchedule::at(std::size_t round) const {
  double lr = initial;
  for (auto d : decay_rounds)
    if (round > d) lr *= decay_factor;
  return lr;
}

Evaluation evaluate(const nn::Network& net, const data::Dataset& ds, std::size_t chunk) {
  if (ds.size() == 0) throw std::invalid_argument("evaluation set is empty");
  if (chunk == 0) chunk = ds.size();
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t lo = 0; lo < ds.size(); lo += chunk) {
    const std::size_t hi = std::min(ds.size(), lo + chunk);
    const Tensor logits = nn::infer(net, ds.samples.slice_rows(lo, hi));
    const std::span<const int> labels(ds.labels.data() + lo, hi - lo);
    loss += nn::softmax_cross_entropy(logits, labels).loss * static_cast<double>(hi - lo);
    const std::size_t classes = logits.dim(1);
    for (std::size_t i = 0; i < hi - lo; ++i) {
      const double* row = logits.data() + i * classes;
      const auto best = static_cast<int>(std::max_element(row, row + classes) - row);
      if (best == labels[i]) ++correct;
    }
  }
  const auto n = static_cast<double>(ds.size());
  return {loss / n, static_cast<double>(correct) / n};
}

std::vector<std::size_t> sample_clients(std::size_t m, double fraction, std::uint64_t seed,
                                        std::size_t round) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("sample_fraction must lie in (0, 1]");
  }
  const auto want = std::min<std::size_t>(
      m, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(m) - 1e-9)));
  std::vector<std::size_t> pool(m);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  if (want == m) return pool;
  Rng rng(derive_seed(seed, round));
  // Partial Fisher-Yates: the first `want` slots are the sample.
  for (std::size_t i = 0; i < want; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(m - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(want);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Simulator::Simulator(nn::Network global, std::vector<ClientProfile> roster,
                     const data::Dataset& train, const data::Dataset& test,
                     SimulationConfig config)
    : global_(std::move(global)),
      roster_(std::move(roster)),
      train_(&train),
      test_(&test),
      config_(std::move(config)) {
  if (config_.tau < 1) throw std::invalid_argument("tau must be at least 1");
  if (config_.batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  check_roster(roster_, global_, config_.mode);
  for (const auto& c : roster_)
    for (auto i : c.shard)
      if (i >= train.size()) {
        throw std::invalid_argument("client " + std::to_string(c.id) +
                                    " shard index out of range");
      }
  if (config_.mode == RunMode::Ablation) locals_.assign(roster_.size(), global_);
  if (config_.svcca.enabled) {
    if (config_.svcca.every_n_rounds == 0 || config_.svcca.batches == 0) {
      throw std::invalid_argument("svcca every_n_rounds and batches must be positive");
    }
    probes_ = test.head(config_.svcca.eval_samples).samples;
  }
}

const RoundMetrics& Simulator::run_round() {
  const std::size_t r = history_.size() + 1;
  const bool ablation = config_.mode == RunMode::Ablation;
  const auto picks =
      sample_clients(roster_.size(), config_.sample_fraction, config_.seeds.rounds, r);

  LocalTrainConfig ltc;
  ltc.tau = config_.tau;
  ltc.batch_size = config_.batch_size;
  ltc.optimizer = nn::OptimizerState(config_.lr.at(r), config_.momentum, config_.weight_decay);

  std::vector<std::optional<LocalTrainResult>> results(picks.size());
  parallel_for(picks.size(), config_.parallel_clients, [&](std::size_t j) {
    const ClientProfile& client = roster_[picks[j]];
    const nn::Network& start = ablation ? locals_[picks[j]] : global_;
    Rng rng(derive_seed(config_.seeds.clients, client.seed_stream, r));
    std::optional<ActivationCache> cache;
    if (const auto* s = std::get_if<SuffixTraining>(&client.strategy); s && s->split_index > 0)
      cache = multi_step_forward(start, client, *train_, r, config_.cache);
    results[j] = local_train(client, start, *train_, cache ? &*cache : nullptr, ltc, rng);
  });

  const bool want_svcca = config_.svcca.enabled && picks.size() >= 2 &&
                          r % config_.svcca.every_n_rounds == 0;
  const bool want_ckpt = config_.checkpoint_dir && config_.checkpoint_every > 0 &&
                         r % config_.checkpoint_every == 0;
  std::vector<nn::Network> views;
  if (want_svcca || want_ckpt) {
    for (const auto& res : results) views.push_back(client_view(global_, *res));
  }

  RoundMetrics m;
  m.round = r;
  for (auto p : picks) m.sampled_clients.push_back(roster_[p].id);
  std::vector<Contribution> contributions;
  for (auto& res : results) {
    m.mean_client_loss += res->contribution.mean_loss;
    contributions.push_back(res->contribution);
  }
  m.mean_client_loss /= static_cast<double>(results.size());
  if (want_svcca) m.per_layer_svcca = round_svcca(views, probes_, config_.svcca);
  if (want_ckpt) {
    std::filesystem::create_directories(*config_.checkpoint_dir);
    for (std::size_t j = 0; j < views.size(); ++j) {
      nn::write_checkpoint(*config_.checkpoint_dir /
                               ("round_" + std::to_string(r) + "_client_" +
                                std::to_string(m.sampled_clients[j]) + ".ckpt"),
                           views[j]);
    }
  }

  global_ = aggregate(global_, contributions, aggregation_mode(config_));

  if (ablation) {
    const SyncMask mask = sync_mask(global_, config_.sync);
    Evaluation sum;
    for (std::size_t j = 0; j < picks.size(); ++j) {
      nn::Network& local = locals_[picks[j]];
      local = std::move(results[j]->model);
      apply_sync(global_, local, mask);
      const Evaluation e = evaluate(local, *test_, config_.eval_chunk);
      sum.loss += e.loss;
      sum.accuracy += e.accuracy;
    }
    m.global_loss = sum.loss / static_cast<double>(picks.size());
    m.global_accuracy = sum.accuracy / static_cast<double>(picks.size());
  } else {
    const Evaluation e = evaluate(global_, *test_, config_.eval_chunk);
    m.global_loss = e.loss;
    m.global_accuracy = e.accuracy;
  }
  if (want_ckpt) {
    nn::write_checkpoint(*config_.checkpoint_dir / ("global_round_" + std::to_string(r) + ".ckpt"),
                         global_);
  }
  history_.push_back(std::move(m));
  return history_.back();
}

void Simulator::run(std::size_t rounds) {
  for (std::size_t i = 0; i < rounds; ++i) run_round();
}

std::optional<std::size_t> rounds_to_target(std::span<const RoundMetrics> metrics,
                                            double target) {
  for (const auto& m : metrics)
    if (m.global_accuracy >= target) return m.round;
  return std::nullopt;
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_metrics_csv(const std::filesystem::path& path,
                       std::span<const RoundMetrics> metrics) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "round,loss,accuracy,sampled_client_ids\n";
  for (const auto& m : metrics) {
    out << m.round << ',' << format_real(m.global_loss) << ','
        << format_real(m.global_accuracy) << ',';
    for (std::size_t i = 0; i < m.sampled_clients.size(); ++i)
      out << (i ? ";" : "") << m.sampled_clients[i];
    out << '\n';
  }
}

void write_svcca_csv(const std::filesystem::path& path, std::span<const RoundMetrics> metrics) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "round,layer,max_svcca\n";
  for (const auto& m : metrics) {
    if (!m.per_layer_svcca) continue;
    for (const auto& [layer, v] : *m.per_layer_svcca)
      out << m.round << ',' << layer << ',' << format_real(v) << '\n';
  }
}

}  // namespace efl::fedsim
