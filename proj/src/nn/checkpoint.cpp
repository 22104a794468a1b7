// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>

namespace efl::nn {
namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'E', 'F', 'L', 'C', 'K', 'P', 'T', '1'};

std::size_t get_size(const json& j, const char* key, const std::string& where,
                     std::optional<std::size_t> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw std::invalid_argument(where + "." + key + ": missing");
  }
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw std::invalid_argument(where + "." + key + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string bytes, std::string origin)
      : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string text(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t offset() const { return pos_; }

  [[noreturn]] void fail(const std::string& why) const {
    throw FormatError(origin_ + ": " + why + " at offset " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated checkpoint");
  }
  std::string bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

json architecture_to_json(const Network& net) {
  json layers = json::array();
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const Layer& l = net.layer(i);
    json j{{"type", kind_name(l.kind)}, {"name", l.name}};
    if (!l.block.empty()) j["block"] = l.block;
    if (const auto* d = std::get_if<Dense>(&l.kind)) {
      j["in"] = d->in;
      j["out"] = d->out;
    } else if (const auto* c = std::get_if<Conv2D>(&l.kind)) {
      j["in_channels"] = c->in_ch;
      j["out_channels"] = c->out_ch;
      j["kernel"] = c->kernel;
      j["stride"] = c->stride;
      j["pad"] = c->pad;
    } else if (const auto* p = std::get_if<MaxPool>(&l.kind)) {
      j["kernel"] = p->kernel;
      j["stride"] = p->stride;
    } else if (const auto* b = std::get_if<BatchNorm>(&l.kind)) {
      j["channels"] = b->channels;
      j["mode"] = b->mode == BnMode::Static ? "static" : "global";
    }
    layers.push_back(std::move(j));
  }
  return json{{"input_shape", net.input_shape()},
              {"split_index", net.split_index()},
              {"layers", std::move(layers)}};
}

Network network_from_json(const json& arch, const BnMode* bn_override) {
  if (!arch.is_object()) throw std::invalid_argument("model: expected an object");
  if (!arch.contains("input_shape") || !arch.at("input_shape").is_array())
    throw std::invalid_argument("model.input_shape: expected an array of positive integers");
  Shape input;
  for (const auto& d : arch.at("input_shape")) {
    if (!d.is_number_integer() || d.get<long long>() <= 0)
      throw std::invalid_argument("model.input_shape: expected positive integers");
    input.push_back(d.get<std::size_t>());
  }
  if (!arch.contains("layers") || !arch.at("layers").is_array())
    throw std::invalid_argument("model.layers: expected an array");
  std::vector<LayerSpec> specs;
  const auto& layers = arch.at("layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const json& j = layers[i];
    const std::string where = "model.layers[" + std::to_string(i) + "]";
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string())
      throw std::invalid_argument(where + ".type: missing");
    const std::string type = j.at("type").get<std::string>();
    LayerSpec spec;
    spec.name = j.value("name", type + std::to_string(i));
    spec.block = j.value("block", std::string());
    if (type == "dense") {
      spec.kind = Dense{get_size(j, "in", where), get_size(j, "out", where)};
    } else if (type == "conv2d") {
      spec.kind = Conv2D{get_size(j, "in_channels", where), get_size(j, "out_channels", where),
                         get_size(j, "kernel", where), get_size(j, "stride", where, 1),
                         get_size(j, "pad", where, 0)};
    } else if (type == "relu") {
      spec.kind = ReLU{};
    } else if (type == "maxpool") {
      spec.kind = MaxPool{get_size(j, "kernel", where, 2), get_size(j, "stride", where, 2)};
    } else if (type == "flatten") {
      spec.kind = Flatten{};
    } else if (type == "batchnorm") {
      BatchNorm bn{get_size(j, "channels", where), BnMode::Global};
      const std::string mode = j.value("mode", std::string("global"));
      if (mode == "static") {
        bn.mode = BnMode::Static;
      } else if (mode != "global") {
        throw std::invalid_argument(where + ".mode: expected static or global");
      }
      if (bn_override) bn.mode = *bn_override;
      spec.kind = bn;
    } else if (type == "softmax_cross_entropy") {
      spec.kind = SoftmaxCrossEntropy{};
    } else {
      throw std::invalid_argument(where + ".type: unknown layer type '" + type + "'");
    }
    specs.push_back(std::move(spec));
  }
  return Network(std::move(input), std::move(specs),
                 get_size(arch, "split_index", "model", 0));
}

void write_checkpoint(const std::filesystem::path& path, const Network& net) {
  std::string out(kMagic, sizeof(kMagic));
  const std::string arch = architecture_to_json(net).dump();
  put_u32(out, static_cast<std::uint32_t>(arch.size()));
  out += arch;
  std::vector<std::pair<std::string, const Tensor*>> entries;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const Layer& l = net.layer(i);
    const auto pn = param_names(l.kind);
    const auto bn = buffer_names(l.kind);
    for (std::size_t p = 0; p < pn.size(); ++p)
      entries.emplace_back(l.name + "." + pn[p], &l.params[p]);
    for (std::size_t b = 0; b < bn.size(); ++b)
      entries.emplace_back(l.name + "." + bn[b], &l.buffers[b]);
  }
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, t] : entries) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t->rank()));
    for (auto d : t->shape()) put_u64(out, d);
    for (double v : t->values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path.string());
  if (r.text(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    r.fail("bad checkpoint magic");
  Checkpoint ck;
  ck.architecture = r.text(r.uint(4));
  const auto count = r.uint(4);
  for (std::uint64_t e = 0; e < count; ++e) {
    NamedTensor nt;
    nt.name = r.text(r.uint(4));
    const auto rank = r.uint(4);
    if (rank > 8) r.fail("implausible tensor rank");
    Shape shape;
    for (std::uint64_t d = 0; d < rank; ++d) shape.push_back(r.uint(8));
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = std::bit_cast<double>(r.uint(8));
    nt.value = Tensor(std::move(shape), std::move(values));
    ck.entries.push_back(std::move(nt));
  }
  if (!r.done()) r.fail("trailing bytes");
  return ck;
}

Network load_network(const std::filesystem::path& path) {
  Checkpoint ck = read_checkpoint(path);
  json arch;
  try {
    arch = json::parse(ck.architecture);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": architecture is not valid JSON");
  }
  Network net = network_from_json(arch);
  std::map<std::string, const Tensor*> by_name;
  for (const auto& e : ck.entries) by_name[e.name] = &e.value;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const Layer& l = net.layer(i);
    const auto pn = param_names(l.kind);
    const auto bn = buffer_names(l.kind);
    auto fetch = [&](const std::string& slot, const Tensor& like) -> const Tensor& {
      auto it = by_name.find(l.name + "." + slot);
      if (it == by_name.end())
        throw FormatError(path.string() + ": missing entry " + l.name + "." + slot);
      if (it->second->shape() != like.shape())
        throw FormatError(path.string() + ": entry " + l.name + "." + slot + " has shape " +
                          shape_str(it->second->shape()) + ", expected " +
                          shape_str(like.shape()));
      return *it->second;
    };
    if (!pn.empty()) {
      auto& params = net.mutable_params(i);
      for (std::size_t p = 0; p < pn.size(); ++p) params[p] = fetch(pn[p], params[p]);
    }
    auto& buffers = net.mutable_buffers(i);
    for (std::size_t b = 0; b < bn.size(); ++b) buffers[b] = fetch(bn[b], buffers[b]);
  }
  return net;
}

}  // namespace efl::nn
