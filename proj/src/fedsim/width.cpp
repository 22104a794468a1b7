// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/fedsim/width.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace efl::fedsim {
namespace {

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::size_t last_dense(const nn::Network& net) {
  std::size_t found = net.num_layers();
  for (std::size_t i = 0; i < net.num_layers(); ++i)
    if (std::holds_alternative<nn::Dense>(net.layer(i).kind)) found = i;
  return found;
}

}  // namespace

std::size_t reduced_width(std::size_t width, double keep_fraction) {
  const double scaled = keep_fraction * static_cast<double>(width);
  // Guard against 0.5 * 4 landing on 2.0000000000000004.
  const auto kept = static_cast<std::size_t>(std::ceil(scaled - 1e-9));
  return std::min(kept, width);
}

WidthReduction width_reduce(const nn::Network& net, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw std::invalid_argument("keep_fraction must lie in (0, 1], got " +
                                std::to_string(keep_fraction));
  }
  const std::size_t classifier = last_dense(net);
  const std::size_t depth = net.num_layers();

  // Global indices of the kept units along the leading axis of the current
  // activation, and the spatial extent behind each unit.
  std::vector<std::size_t> kept = iota(net.input_shape().front());
  std::size_t spatial = shape_numel(net.input_shape()) / net.input_shape().front();

  std::vector<nn::LayerSpec> specs = net.specs();
  IndexMap map;
  map.params.resize(depth);
  map.buffers.resize(depth);

  for (std::size_t i = 0; i < depth; ++i) {
    auto& spec = specs[i];
    const std::string& name = net.layer(i).name;
    if (auto* c = std::get_if<nn::Conv2D>(&spec.kind)) {
      const std::size_t out = reduced_width(c->out_ch, keep_fraction);
      if (out == 0) throw std::invalid_argument("layer " + name + " reduced to zero width");
      const std::size_t kk = c->kernel * c->kernel;
      std::vector<std::size_t> w;
      for (std::size_t o = 0; o < out; ++o)
        for (auto ci : kept)
          for (std::size_t p = 0; p < kk; ++p) w.push_back((o * c->in_ch + ci) * kk + p);
      map.params[i] = {std::move(w), iota(out)};
      c->in_ch = kept.size();
      c->out_ch = out;
      kept = iota(out);
      spatial = shape_numel(net.shape_before(i + 1)) / net.shape_before(i + 1).front();
    } else if (auto* d = std::get_if<nn::Dense>(&spec.kind)) {
      const std::size_t out = i == classifier ? d->out : reduced_width(d->out, keep_fraction);
      if (out == 0) throw std::invalid_argument("layer " + name + " reduced to zero width");
      std::vector<std::size_t> w;
      for (std::size_t o = 0; o < out; ++o)
        for (auto fi : kept) w.push_back(o * d->in + fi);
      map.params[i] = {std::move(w), iota(out)};
      d->in = kept.size();
      d->out = out;
      kept = iota(out);
      spatial = 1;
    } else if (auto* b = std::get_if<nn::BatchNorm>(&spec.kind)) {
      map.params[i] = {kept, kept};
      map.buffers[i] = {kept, kept};
      b->channels = kept.size();
    } else if (std::holds_alternative<nn::Flatten>(spec.kind)) {
      std::vector<std::size_t> features;
      for (auto ch : kept)
        for (std::size_t p = 0; p < spatial; ++p) features.push_back(ch * spatial + p);
      kept = std::move(features);
      spatial = 1;
    } else if (std::holds_alternative<nn::MaxPool>(spec.kind)) {
      const Shape& s = net.shape_before(i + 1);
      spatial = shape_numel(s) / s.front();
    }
  }

  nn::Network sub(net.input_shape(), std::move(specs), net.split_index());
  for (std::size_t i = 0; i < depth; ++i) {
    auto& params = sub.mutable_params(i);
    for (std::size_t s = 0; s < params.size(); ++s) {
      const auto& g = net.params(i)[s];
      const auto& idx = map.params[i][s];
      for (std::size_t e = 0; e < idx.size(); ++e) params[s][e] = g[idx[e]];
    }
    auto& buffers = sub.mutable_buffers(i);
    for (std::size_t s = 0; s < buffers.size(); ++s) {
      const auto& g = net.buffers(i)[s];
      const auto& idx = map.buffers[i][s];
      for (std::size_t e = 0; e < idx.size(); ++e) buffers[s][e] = g[idx[e]];
    }
  }
  return {std::move(sub), std::move(map)};
}

}  // namespace efl::fedsim
