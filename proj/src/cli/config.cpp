// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>

#include "efl/nn/checkpoint.hpp"

namespace efl::cli {
namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path.empty() ? "config" : path, "must be an object");
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      throw ConfigError(join(path, key), "unknown field");
    }
  }
}

std::uint64_t get_uint(const json& j, const std::string& path, const char* key,
                       std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    if (v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError(join(path, key), "must be a non-negative integer, got " + v.dump());
  }
  throw ConfigError(join(path, key), "must be an integer, got " + v.dump());
}

double get_real(const json& j, const std::string& path, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(join(path, key), "must be a number, got " + v.dump());
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(join(path, key), "must be finite");
  return d;
}

std::string get_string(const json& j, const std::string& path, const char* key,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError(join(path, key), "must be a string, got " + v.dump());
  return v.get<std::string>();
}

bool get_bool(const json& j, const std::string& path, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError(join(path, key), "must be true or false");
  return v.get<bool>();
}

DatasetSpec parse_dataset(const json& j) {
  const std::string path = "dataset";
  require_object(j, path);
  DatasetSpec d;
  const std::string kind = get_string(j, path, "kind", "synthetic_digits");
  if (kind == "synthetic_digits") {
    check_keys(j, path, {"kind", "train_count", "test_count", "side", "pixel_noise",
                         "drop_segment", "extra_segment"});
    d.kind = DatasetKind::SyntheticDigits;
    d.train_count = get_uint(j, path, "train_count", d.train_count);
    d.test_count = get_uint(j, path, "test_count", d.test_count);
    d.style.side = get_uint(j, path, "side", d.style.side);
    d.style.pixel_noise = get_real(j, path, "pixel_noise", d.style.pixel_noise);
    d.style.drop_segment = get_real(j, path, "drop_segment", d.style.drop_segment);
    d.style.extra_segment = get_real(j, path, "extra_segment", d.style.extra_segment);
    if (d.train_count == 0) throw ConfigError("dataset.train_count", "must be at least 1");
    if (d.test_count == 0) throw ConfigError("dataset.test_count", "must be at least 1");
    if (d.style.side < 8) throw ConfigError("dataset.side", "must be at least 8");
    for (auto [name, p] : {std::pair{"dataset.drop_segment", d.style.drop_segment},
                           std::pair{"dataset.extra_segment", d.style.extra_segment}})
      if (p < 0.0 || p > 1.0) throw ConfigError(name, "must lie in [0, 1]");
    if (d.style.pixel_noise < 0.0) throw ConfigError("dataset.pixel_noise", "must be >= 0");
  } else if (kind == "gaussian") {
    check_keys(j, path, {"kind", "num_classes", "train_per_class", "test_per_class", "dim"});
    d.kind = DatasetKind::Gaussian;
    d.num_classes = static_cast<int>(get_uint(j, path, "num_classes", 10));
    d.train_per_class = get_uint(j, path, "train_per_class", d.train_per_class);
    d.test_per_class = get_uint(j, path, "test_per_class", d.test_per_class);
    d.dim = get_uint(j, path, "dim", d.dim);
    if (d.num_classes < 2) throw ConfigError("dataset.num_classes", "must be at least 2");
    if (d.train_per_class == 0) throw ConfigError("dataset.train_per_class", "must be >= 1");
    if (d.test_per_class == 0) throw ConfigError("dataset.test_per_class", "must be >= 1");
    if (d.dim == 0) throw ConfigError("dataset.dim", "must be at least 1");
  } else if (kind == "idx") {
    check_keys(j, path, {"kind", "train_images", "train_labels", "test_images", "test_labels",
                         "train_limit", "test_limit"});
    d.kind = DatasetKind::Idx;
    for (auto [key, dest] : {std::pair{"train_images", &d.train_images},
                             std::pair{"train_labels", &d.train_labels},
                             std::pair{"test_images", &d.test_images},
                             std::pair{"test_labels", &d.test_labels}}) {
      *dest = get_string(j, path, key, "");
      if (dest->empty()) throw ConfigError(join(path, key), "is required for idx datasets");
    }
    d.train_limit = get_uint(j, path, "train_limit", 0);
    d.test_limit = get_uint(j, path, "test_limit", 0);
  } else {
    throw ConfigError("dataset.kind",
                      "must be synthetic_digits, gaussian or idx, got \"" + kind + "\"");
  }
  return d;
}

PartitionSpec parse_partition(const json& j) {
  const std::string path = "partition";
  require_object(j, path);
  check_keys(j, path, {"kind", "alpha"});
  PartitionSpec p;
  const std::string kind = get_string(j, path, "kind", "dirichlet");
  if (kind == "dirichlet") {
    p.kind = PartitionKind::Dirichlet;
  } else if (kind == "iid") {
    p.kind = PartitionKind::Iid;
  } else {
    throw ConfigError("partition.kind", "must be dirichlet or iid, got \"" + kind + "\"");
  }
  p.alpha = get_real(j, path, "alpha", p.alpha);
  if (!(p.alpha > 0.0)) throw ConfigError("partition.alpha", "must be positive");
  return p;
}

fedsim::Tier parse_tier(const std::string& s, const std::string& path) {
  if (s == "strong") return fedsim::Tier::Strong;
  if (s == "moderate") return fedsim::Tier::Moderate;
  if (s == "weak") return fedsim::Tier::Weak;
  throw ConfigError(path, "must be strong, moderate or weak, got \"" + s + "\"");
}

std::vector<TierSpec> parse_roster(const json& j) {
  require_object(j, "roster");
  check_keys(j, "roster", {"tiers"});
  if (!j.contains("tiers") || !j.at("tiers").is_array() || j.at("tiers").empty()) {
    throw ConfigError("roster.tiers", "must be a non-empty array");
  }
  std::vector<TierSpec> tiers;
  for (std::size_t i = 0; i < j.at("tiers").size(); ++i) {
    const json& t = j.at("tiers")[i];
    const std::string path = "roster.tiers[" + std::to_string(i) + "]";
    require_object(t, path);
    check_keys(t, path, {"tier", "count", "split_index", "keep_fraction"});
    TierSpec spec;
    spec.tier = parse_tier(get_string(t, path, "tier", "strong"), join(path, "tier"));
    spec.count = get_uint(t, path, "count", 0);
    if (spec.count == 0) throw ConfigError(join(path, "count"), "must be at least 1");
    if (t.contains("split_index")) spec.split_index = get_uint(t, path, "split_index", 0);
    if (t.contains("keep_fraction")) {
      const double f = get_real(t, path, "keep_fraction", 1.0);
      if (!(f > 0.0 && f <= 1.0)) {
        throw ConfigError(join(path, "keep_fraction"), "must lie in (0, 1]");
      }
      spec.keep_fraction = f;
    }
    tiers.push_back(spec);
  }
  return tiers;
}

void parse_mode(const std::string& s, ExperimentConfig& c) {
  using fedsim::RunMode;
  using fedsim::SyncStrategy;
  if (s == "embracing") {
    c.mode = RunMode::EmbracingFL;
  } else if (s == "fedavg") {
    c.mode = RunMode::FedAvg;
  } else if (s == "width_reduction") {
    c.mode = RunMode::WidthReduction;
  } else if (s.starts_with("ablation:")) {
    c.mode = RunMode::Ablation;
    const std::string sync = s.substr(9);
    if (sync == "first_half") c.sync = SyncStrategy::FirstHalf;
    else if (sync == "second_half") c.sync = SyncStrategy::SecondHalf;
    else if (sync == "channel_wise") c.sync = SyncStrategy::ChannelWise;
    else if (sync == "none") c.sync = SyncStrategy::None;
    else throw ConfigError("mode", "unknown ablation strategy \"" + sync + "\"");
  } else {
    throw ConfigError("mode",
                      "must be embracing, fedavg, width_reduction or "
                      "ablation:{first_half|second_half|channel_wise|none}, got \"" + s + "\"");
  }
}

std::string mode_string(const ExperimentConfig& c) {
  if (c.mode == fedsim::RunMode::Ablation) return "ablation:" + fedsim::sync_strategy_name(c.sync);
  return fedsim::run_mode_name(c.mode);
}

}  // namespace

std::size_t ExperimentConfig::num_clients() const {
  std::size_t n = 0;
  for (const auto& t : tiers) n += t.count;
  return n;
}

ExperimentConfig parse_config(const json& j) {
  require_object(j, "");
  check_keys(j, "", {"dataset", "partition", "model", "roster", "mode", "rounds", "tau",
                     "batch_size", "lr", "momentum", "weight_decay", "sample_fraction", "seeds",
                     "bn_mode", "svcca", "l_max", "targets", "checkpoint_every", "cache"});
  ExperimentConfig c;
  c.dataset = parse_dataset(j.value("dataset", json::object()));
  c.partition = parse_partition(j.value("partition", json::object()));

  if (!j.contains("model")) throw ConfigError("model", "is required");
  c.model = j.at("model");
  try {
    (void)nn::network_from_json(c.model);
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (msg.starts_with("model.") && colon != std::string::npos) {
      throw ConfigError(msg.substr(0, colon), msg.substr(colon + 2));
    }
    throw ConfigError("model", msg);
  }

  if (!j.contains("roster")) throw ConfigError("roster", "is required");
  c.tiers = parse_roster(j.at("roster"));

  parse_mode(get_string(j, "", "mode", "embracing"), c);

  const std::uint64_t rounds = get_uint(j, "", "rounds", 1);
  if (rounds < 1) throw ConfigError("rounds", "must be at least 1");
  c.rounds = rounds;
  const std::uint64_t tau = get_uint(j, "", "tau", 10);
  if (tau < 1) throw ConfigError("tau", "must be at least 1");
  if (tau > 1000000) throw ConfigError("tau", "is unreasonably large");
  c.tau = static_cast<int>(tau);
  c.batch_size = get_uint(j, "", "batch_size", 32);
  if (c.batch_size < 1) throw ConfigError("batch_size", "must be at least 1");

  const json lr = j.value("lr", json::object());
  require_object(lr, "lr");
  check_keys(lr, "lr", {"initial", "decay_factor", "decay_rounds"});
  c.lr.initial = get_real(lr, "lr", "initial", 0.05);
  c.lr.decay_factor = get_real(lr, "lr", "decay_factor", 0.1);
  if (c.lr.initial < 0.0) throw ConfigError("lr.initial", "must be >= 0");
  if (!(c.lr.decay_factor > 0.0)) throw ConfigError("lr.decay_factor", "must be positive");
  if (lr.contains("decay_rounds")) {
    if (!lr.at("decay_rounds").is_array()) throw ConfigError("lr.decay_rounds", "must be an array");
    for (std::size_t i = 0; i < lr.at("decay_rounds").size(); ++i) {
      const json& v = lr.at("decay_rounds")[i];
      if (!v.is_number_unsigned()) {
        throw ConfigError("lr.decay_rounds[" + std::to_string(i) + "]",
                          "must be a non-negative integer");
      }
      c.lr.decay_rounds.push_back(v.get<std::size_t>());
    }
  }

  c.momentum = get_real(j, "", "momentum", 0.9);
  if (c.momentum < 0.0 || c.momentum >= 1.0) throw ConfigError("momentum", "must lie in [0, 1)");
  c.weight_decay = get_real(j, "", "weight_decay", 1e-4);
  if (c.weight_decay < 0.0) throw ConfigError("weight_decay", "must be >= 0");
  c.sample_fraction = get_real(j, "", "sample_fraction", 1.0);
  if (!(c.sample_fraction > 0.0 && c.sample_fraction <= 1.0)) {
    throw ConfigError("sample_fraction", "must lie in (0, 1]");
  }

  const json seeds = j.value("seeds", json::object());
  require_object(seeds, "seeds");
  check_keys(seeds, "seeds", {"data", "init", "rounds", "clients"});
  c.seeds.data = get_uint(seeds, "seeds", "data", c.seeds.data);
  c.seeds.init = get_uint(seeds, "seeds", "init", c.seeds.init);
  c.seeds.rounds = get_uint(seeds, "seeds", "rounds", c.seeds.rounds);
  c.seeds.clients = get_uint(seeds, "seeds", "clients", c.seeds.clients);

  const std::string bn = get_string(j, "", "bn_mode", "global");
  if (bn == "global") c.bn_mode = nn::BnMode::Global;
  else if (bn == "static") c.bn_mode = nn::BnMode::Static;
  else throw ConfigError("bn_mode", "must be static or global, got \"" + bn + "\"");

  const json sv = j.value("svcca", json::object());
  require_object(sv, "svcca");
  check_keys(sv, "svcca", {"enabled", "k", "every_n_rounds", "eval_samples", "batches"});
  c.svcca.enabled = get_bool(sv, "svcca", "enabled", false);
  c.svcca.k = get_uint(sv, "svcca", "k", c.svcca.k);
  c.svcca.every_n_rounds = get_uint(sv, "svcca", "every_n_rounds", c.svcca.every_n_rounds);
  c.svcca.eval_samples = get_uint(sv, "svcca", "eval_samples", c.svcca.eval_samples);
  c.svcca.batches = get_uint(sv, "svcca", "batches", c.svcca.batches);
  if (c.svcca.k < 1) throw ConfigError("svcca.k", "must be at least 1");
  if (c.svcca.every_n_rounds < 1) throw ConfigError("svcca.every_n_rounds", "must be at least 1");
  if (c.svcca.batches < 1) throw ConfigError("svcca.batches", "must be at least 1");
  if (c.svcca.eval_samples < 2 * c.svcca.batches) {
    throw ConfigError("svcca.eval_samples", "must give every batch at least two samples");
  }

  if (j.contains("l_max")) {
    const double l = get_real(j, "", "l_max", 0.0);
    if (!(l > 0.0)) throw ConfigError("l_max", "must be positive");
    c.l_max = l;
  }
  if (j.contains("targets")) {
    if (!j.at("targets").is_array()) throw ConfigError("targets", "must be an array");
    for (std::size_t i = 0; i < j.at("targets").size(); ++i) {
      const json& v = j.at("targets")[i];
      const std::string path = "targets[" + std::to_string(i) + "]";
      if (!v.is_number()) throw ConfigError(path, "must be a number");
      const double t = v.get<double>();
      if (t < 0.0 || t > 1.0) throw ConfigError(path, "must lie in [0, 1]");
      c.targets.push_back(t);
    }
  }
  c.checkpoint_every = get_uint(j, "", "checkpoint_every", 0);

  const json cache = j.value("cache", json::object());
  require_object(cache, "cache");
  check_keys(cache, "cache", {"chunk", "spill_to_disk"});
  c.cache_chunk = get_uint(cache, "cache", "chunk", c.cache_chunk);
  if (c.cache_chunk < 1) throw ConfigError("cache.chunk", "must be at least 1");
  c.cache_spill = get_bool(cache, "cache", "spill_to_disk", false);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  json d;
  switch (c.dataset.kind) {
    case DatasetKind::SyntheticDigits:
      d = {{"kind", "synthetic_digits"},
           {"train_count", c.dataset.train_count},
           {"test_count", c.dataset.test_count},
           {"side", c.dataset.style.side},
           {"pixel_noise", c.dataset.style.pixel_noise},
           {"drop_segment", c.dataset.style.drop_segment},
           {"extra_segment", c.dataset.style.extra_segment}};
      break;
    case DatasetKind::Gaussian:
      d = {{"kind", "gaussian"},
           {"num_classes", c.dataset.num_classes},
           {"train_per_class", c.dataset.train_per_class},
           {"test_per_class", c.dataset.test_per_class},
           {"dim", c.dataset.dim}};
      break;
    case DatasetKind::Idx:
      d = {{"kind", "idx"},
           {"train_images", c.dataset.train_images},
           {"train_labels", c.dataset.train_labels},
           {"test_images", c.dataset.test_images},
           {"test_labels", c.dataset.test_labels},
           {"train_limit", c.dataset.train_limit},
           {"test_limit", c.dataset.test_limit}};
      break;
  }
  j["dataset"] = d;
  j["partition"] = {{"kind", c.partition.kind == PartitionKind::Iid ? "iid" : "dirichlet"},
                    {"alpha", c.partition.alpha}};
  j["model"] = c.model;
  json tiers = json::array();
  for (const auto& t : c.tiers) {
    json tj = {{"tier", fedsim::tier_name(t.tier)}, {"count", t.count}};
    if (t.split_index) tj["split_index"] = *t.split_index;
    if (t.keep_fraction) tj["keep_fraction"] = *t.keep_fraction;
    tiers.push_back(tj);
  }
  j["roster"] = {{"tiers", tiers}};
  j["mode"] = mode_string(c);
  j["rounds"] = c.rounds;
  j["tau"] = c.tau;
  j["batch_size"] = c.batch_size;
  j["lr"] = {{"initial", c.lr.initial},
             {"decay_factor", c.lr.decay_factor},
             {"decay_rounds", c.lr.decay_rounds}};
  j["momentum"] = c.momentum;
  j["weight_decay"] = c.weight_decay;
  j["sample_fraction"] = c.sample_fraction;
  j["seeds"] = {{"data", c.seeds.data},
                {"init", c.seeds.init},
                {"rounds", c.seeds.rounds},
                {"clients", c.seeds.clients}};
  j["bn_mode"] = c.bn_mode == nn::BnMode::Static ? "static" : "global";
  j["svcca"] = {{"enabled", c.svcca.enabled},
                {"k", c.svcca.k},
                {"every_n_rounds", c.svcca.every_n_rounds},
                {"eval_samples", c.svcca.eval_samples},
                {"batches", c.svcca.batches}};
  if (c.l_max) j["l_max"] = *c.l_max;
  j["targets"] = c.targets;
  j["checkpoint_every"] = c.checkpoint_every;
  j["cache"] = {{"chunk", c.cache_chunk}, {"spill_to_disk", c.cache_spill}};
  return j;
}

void apply_seed_override(ExperimentConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("--seed-override", "expected key=value, got \"" + assignment + "\"");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  std::uint64_t v = 0;
  try {
    std::size_t used = 0;
    if (value.empty() || value.front() == '-') throw std::invalid_argument("negative");
    v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw ConfigError("seeds." + key, "override value must be a non-negative integer");
  }
  if (key == "data") c.seeds.data = v;
  else if (key == "init") c.seeds.init = v;
  else if (key == "rounds") c.seeds.rounds = v;
  else if (key == "clients") c.seeds.clients = v;
  else throw ConfigError("seeds." + key, "unknown seed (expected data, init, rounds, clients)");
}

}  // namespace efl::cli
