// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/nn/network.hpp"

#include <algorithm>
#include <cmath>

#include "efl/kernels.hpp"

namespace efl::nn {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void shape_fail(std::size_t i, const std::string& kind,
                             const Shape& got, const std::string& why) {
  throw DimensionError("layer " + std::to_string(i) + " (" + kind + ") " + why +
                       ", input shape " + shape_str(got));
}

Shape infer_output(std::size_t i, const LayerKind& kind, const Shape& in) {
  const std::string name = kind_name(kind);
  return std::visit(
      Overloaded{
          [&](const Dense& d) -> Shape {
            if (d.in == 0 || d.out == 0) shape_fail(i, name, in, "has a zero dimension");
            if (in.size() != 1 || in[0] != d.in)
              shape_fail(i, name, in, "expects [" + std::to_string(d.in) + "]");
            return {d.out};
          },
          [&](const Conv2D& c) -> Shape {
            if (c.in_ch == 0 || c.out_ch == 0 || c.kernel == 0 || c.stride == 0)
              shape_fail(i, name, in, "has a zero dimension");
            if (in.size() != 3 || in[0] != c.in_ch)
              shape_fail(i, name, in, "expects " + std::to_string(c.in_ch) + " channels");
            return {c.out_ch, conv_out_extent(in[1], c.kernel, c.stride, c.pad),
                    conv_out_extent(in[2], c.kernel, c.stride, c.pad)};
          },
          [&](const ReLU&) -> Shape { return in; },
          [&](const MaxPool& p) -> Shape {
            if (in.size() != 3) shape_fail(i, name, in, "expects (C,H,W)");
            return {in[0], conv_out_extent(in[1], p.kernel, p.stride, 0),
                    conv_out_extent(in[2], p.kernel, p.stride, 0)};
          },
          [&](const Flatten&) -> Shape { return {shape_numel(in)}; },
          [&](const BatchNorm& b) -> Shape {
            if (b.channels == 0) shape_fail(i, name, in, "has zero channels");
            if ((in.size() != 1 && in.size() != 3) || in[0] != b.channels)
              shape_fail(i, name, in, "expects " + std::to_string(b.channels) + " channels");
            return in;
          },
          [&](const SoftmaxCrossEntropy&) -> Shape {
            if (in.size() != 1) shape_fail(i, name, in, "expects logits");
            return in;
          },
      },
      kind);
}

std::vector<Tensor> make_params(const LayerKind& kind) {
  return std::visit(
      Overloaded{
          [](const Dense& d) -> std::vector<Tensor> {
            return {Tensor({d.out, d.in}), Tensor({d.out})};
          },
          [](const Conv2D& c) -> std::vector<Tensor> {
            return {Tensor({c.out_ch, c.in_ch, c.kernel, c.kernel}), Tensor({c.out_ch})};
          },
          [](const BatchNorm& b) -> std::vector<Tensor> {
            return {Tensor({b.channels}, 1.0), Tensor({b.channels})};
          },
          [](const auto&) -> std::vector<Tensor> { return {}; },
      },
      kind);
}

std::vector<Tensor> make_buffers(const LayerKind& kind) {
  if (const auto* b = std::get_if<BatchNorm>(&kind)) {
    return {Tensor({b->channels}), Tensor({b->channels}, 1.0)};
  }
  return {};
}

Shape batch_shape(std::size_t n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

struct BatchStats {
  std::vector<double> mean, var;  // biased variance
  std::size_t count = 0;
};

// BatchNorm over (N, C, S) where S is the spatial size (1 for 2-D input).
Tensor batchnorm_forward(const Layer& layer, const Tensor& x, Mode mode,
                         LayerRecord* rec, BatchStats* stats) {
  const auto& bn = std::get<BatchNorm>(layer.kind);
  const std::size_t n = x.dim(0), c = bn.channels;
  const std::size_t s = x.size() / (n * c);
  const Tensor& gamma = layer.params[0];
  const Tensor& beta = layer.params[1];
  std::vector<double> mean(c), inv(c);
  // Static mode never tracks running statistics, so it normalizes every
  // batch by its own moments, evaluation included.
  if (mode == Mode::Train || bn.mode == BnMode::Static) {
    const double count = static_cast<double>(n * s);
    std::vector<double> var(c, 0.0);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = x.data() + (i * c + ch) * s;
        for (std::size_t j = 0; j < s; ++j) acc += p[j];
      }
      mean[ch] = acc / count;
      double vacc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = x.data() + (i * c + ch) * s;
        for (std::size_t j = 0; j < s; ++j) {
          const double d = p[j] - mean[ch];
          vacc += d * d;
        }
      }
      var[ch] = vacc / count;
      inv[ch] = 1.0 / std::sqrt(var[ch] + kBnEpsilon);
    }
    if (stats) *stats = BatchStats{mean, var, n * s};
  } else {
    const Tensor& rmean = layer.buffers[0];
    const Tensor& rvar = layer.buffers[1];
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = rmean[ch];
      inv[ch] = 1.0 / std::sqrt(rvar[ch] + kBnEpsilon);
    }
  }
  Tensor y(x.shape());
  Tensor xhat(rec ? x.shape() : Shape{0});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (i * c + ch) * s;
      for (std::size_t j = 0; j < s; ++j) {
        const double h = (x[off + j] - mean[ch]) * inv[ch];
        if (rec) xhat[off + j] = h;
        y[off + j] = gamma[ch] * h + beta[ch];
      }
    }
  }
  if (rec) {
    rec->normalized = std::move(xhat);
    rec->inv_std = std::move(inv);
  }
  return y;
}

Tensor dense_forward(const Layer& layer, const Tensor& x) {
  const auto& d = std::get<Dense>(layer.kind);
  const std::size_t n = x.dim(0);
  Tensor y = matmul_nt(x.reshaped({n, d.in}), layer.params[0]);
  const Tensor& b = layer.params[1];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d.out; ++j) y.at(i, j) += b[j];
  return y;
}

Tensor layer_forward(const Layer& layer, const Tensor& x, Mode mode,
                     LayerRecord* rec, BatchStats* stats) {
  return std::visit(
      Overloaded{
          [&](const Dense&) { return dense_forward(layer, x); },
          [&](const Conv2D& c) {
            return conv2d_forward(x, layer.params[0], layer.params[1],
                                  {c.stride, c.pad});
          },
          [&](const ReLU&) {
            Tensor y = x;
            for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
            return y;
          },
          [&](const MaxPool& p) {
            MaxPoolResult r = maxpool_forward(x, p.kernel, p.stride);
            if (rec) rec->argmax = std::move(r.argmax);
            return std::move(r.output);
          },
          [&](const Flatten&) {
            return x.reshaped({x.dim(0), x.size() / std::max<std::size_t>(x.dim(0), 1)});
          },
          [&](const BatchNorm&) { return batchnorm_forward(layer, x, mode, rec, stats); },
          [&](const SoftmaxCrossEntropy&) { return x; },
      },
      layer.kind);
}

void check_input(const Network& net, const Tensor& x, std::size_t start) {
  if (x.rank() == 0 || x.dim(0) == 0) {
    throw DimensionError("network input must be a non-empty batch, got " +
                         shape_str(x.shape()));
  }
  const Shape want = batch_shape(x.dim(0), net.shape_before(start));
  if (x.shape() != want) {
    throw DimensionError("network input at layer " + std::to_string(start) +
                         " expects " + shape_str(want) + ", got " +
                         shape_str(x.shape()));
  }
}

}  // namespace

std::string kind_name(const LayerKind& kind) {
  return std::visit(Overloaded{
                        [](const Dense&) { return std::string("dense"); },
                        [](const Conv2D&) { return std::string("conv2d"); },
                        [](const ReLU&) { return std::string("relu"); },
                        [](const MaxPool&) { return std::string("maxpool"); },
                        [](const Flatten&) { return std::string("flatten"); },
                        [](const BatchNorm&) { return std::string("batchnorm"); },
                        [](const SoftmaxCrossEntropy&) {
                          return std::string("softmax_cross_entropy");
                        },
                    },
                    kind);
}

std::vector<std::string> param_names(const LayerKind& kind) {
  if (std::holds_alternative<Dense>(kind) || std::holds_alternative<Conv2D>(kind))
    return {"weight", "bias"};
  if (std::holds_alternative<BatchNorm>(kind)) return {"gamma", "beta"};
  return {};
}

std::vector<std::string> buffer_names(const LayerKind& kind) {
  if (std::holds_alternative<BatchNorm>(kind)) return {"running_mean", "running_var"};
  return {};
}

Network::Network(Shape input_shape, std::vector<LayerSpec> specs,
                 std::size_t split_index)
    : input_shape_(std::move(input_shape)) {
  if (input_shape_.empty() || shape_numel(input_shape_) == 0) {
    throw DimensionError("network input shape must be non-empty and positive, got " +
                         shape_str(input_shape_));
  }
  if (specs.empty()) throw DimensionError("network needs at least one layer");
  shapes_.push_back(input_shape_);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto& spec = specs[i];
    if (std::holds_alternative<SoftmaxCrossEntropy>(spec.kind) && i + 1 != specs.size()) {
      throw DimensionError("softmax_cross_entropy must be the last layer");
    }
    shapes_.push_back(infer_output(i, spec.kind, shapes_.back()));
    if (spec.name.empty()) spec.name = "layer" + std::to_string(i);
    layers_.push_back(Layer{spec.name, spec.kind, spec.block, make_params(spec.kind),
                            make_buffers(spec.kind)});
  }
  for (std::size_t i = 0; i < layers_.size(); ++i)
    for (std::size_t j = i + 1; j < layers_.size(); ++j)
      if (layers_[i].name == layers_[j].name)
        throw std::invalid_argument("duplicate layer name '" + layers_[i].name + "'");
  set_split_index(split_index);
}

void Network::initialize(Rng& rng) {
  for (auto& layer : layers_) {
    std::size_t fan_in = 0;
    if (const auto* d = std::get_if<Dense>(&layer.kind)) fan_in = d->in;
    if (const auto* c = std::get_if<Conv2D>(&layer.kind))
      fan_in = c->in_ch * c->kernel * c->kernel;
    if (fan_in > 0) {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (auto& w : layer.params[0].values()) w = rng.uniform(-bound, bound);
      for (auto& b : layer.params[1].values()) b = 0.0;
    }
    if (std::holds_alternative<BatchNorm>(layer.kind)) {
      layer.params = make_params(layer.kind);
      layer.buffers = make_buffers(layer.kind);
    }
  }
  ++version_;
}

std::vector<Tensor>& Network::mutable_params(std::size_t i) {
  ++version_;
  return layers_.at(i).params;
}

void Network::set_split_index(std::size_t k) {
  if (!is_block_boundary(k)) {
    throw std::invalid_argument("split index " + std::to_string(k) +
                                " is not a block boundary");
  }
  split_index_ = k;
}

bool Network::is_block_boundary(std::size_t k) const {
  if (k == 0 || k == layers_.size()) return true;
  if (k > layers_.size()) return false;
  const auto& before = layers_[k - 1].block;
  return before.empty() || before != layers_[k].block;
}

std::vector<std::size_t> Network::block_boundaries() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k <= layers_.size(); ++k)
    if (is_block_boundary(k)) out.push_back(k);
  return out;
}

std::vector<LayerSpec> Network::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers_) out.push_back({l.name, l.kind, l.block});
  return out;
}

std::size_t Network::num_classes() const { return shape_numel(shapes_.back()); }

std::size_t Network::parameter_count(std::size_t from) const {
  std::size_t total = 0;
  for (std::size_t i = from; i < layers_.size(); ++i)
    for (const auto& p : layers_[i].params) total += p.size();
  return total;
}

std::size_t Network::activation_count(std::size_t from, std::size_t batch) const {
  std::size_t total = 0;
  for (std::size_t i = from; i < layers_.size(); ++i) {
    if (std::holds_alternative<SoftmaxCrossEntropy>(layers_[i].kind)) continue;
    total += shape_numel(shapes_[i + 1]);
  }
  return total * batch;
}

std::size_t GradientSet::num_members() const {
  return static_cast<std::size_t>(std::count(member.begin(), member.end(), true));
}

ForwardResult forward_from(Network& net, const Tensor& input, std::size_t start,
                           Mode mode) {
  if (start > net.num_layers()) {
    throw std::invalid_argument("forward start " + std::to_string(start) +
                                " beyond network depth " +
                                std::to_string(net.num_layers()));
  }
  check_input(net, input, start);
  ForwardResult r;
  r.trace.start = start;
  r.trace.mode = mode;
  r.trace.owner = &net;
  r.trace.records.resize(net.num_layers() - start);
  Tensor x = input;
  for (std::size_t i = start; i < net.num_layers(); ++i) {
    LayerRecord& rec = r.trace.records[i - start];
    BatchStats stats;
    Tensor y = layer_forward(net.layer(i), x, mode, &rec, &stats);
    const auto* bn = std::get_if<BatchNorm>(&net.layer(i).kind);
    if (bn && mode == Mode::Train && bn->mode == BnMode::Global) {
      auto& buf = net.mutable_buffers(i);
      const double unbias = stats.count > 1
                                ? static_cast<double>(stats.count) /
                                      static_cast<double>(stats.count - 1)
                                : 1.0;
      for (std::size_t ch = 0; ch < bn->channels; ++ch) {
        buf[0][ch] = (1.0 - kBnMomentum) * buf[0][ch] + kBnMomentum * stats.mean[ch];
        buf[1][ch] =
            (1.0 - kBnMomentum) * buf[1][ch] + kBnMomentum * stats.var[ch] * unbias;
      }
    }
    rec.input = std::move(x);
    x = std::move(y);
  }
  r.trace.version = net.version();
  r.trace.logits = x;
  r.logits = std::move(x);
  return r;
}

Tensor infer_range(const Network& net, const Tensor& input, std::size_t begin,
                   std::size_t end) {
  if (begin > end || end > net.num_layers()) {
    throw std::invalid_argument("layer range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") invalid for depth " +
                                std::to_string(net.num_layers()));
  }
  check_input(net, input, begin);
  Tensor x = input;
  for (std::size_t i = begin; i < end; ++i)
    x = layer_forward(net.layer(i), x, Mode::Eval, nullptr, nullptr);
  return x;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("cross-entropy logits " + shape_str(logits.shape()) +
                         " do not match " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  LossResult r{0.0, Tensor(logits.shape())};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = labels[i];
    if (label < 0 || static_cast<std::size_t>(label) >= c) {
      throw std::invalid_argument("label " + std::to_string(label) +
                                  " outside [0, " + std::to_string(c) + ")");
    }
    const double* z = logits.data() + i * c;
    const double top = *std::max_element(z, z + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(z[j] - top);
    const double log_total = std::log(total);
    r.loss += (log_total - (z[label] - top)) * inv_n;
    double* g = r.grad.data() + i * c;
    for (std::size_t j = 0; j < c; ++j) g[j] = std::exp(z[j] - top - log_total) * inv_n;
    g[label] -= inv_n;
  }
  return r;
}

BackwardResult backward(const Network& net, const ActivationTrace& trace,
                        std::span<const int> labels, std::size_t from_layer) {
  if (trace.owner != &net || trace.version != net.version()) {
    throw StateError("activation trace is stale or belongs to another network");
  }
  if (trace.mode != Mode::Train) {
    throw StateError("backward requires a Train-mode trace");
  }
  const std::size_t depth = net.num_layers();
  if (from_layer > depth) {
    throw std::invalid_argument("from_layer " + std::to_string(from_layer) +
                                " beyond network depth " + std::to_string(depth));
  }
  if (from_layer < trace.start) {
    throw StateError("trace starts at layer " + std::to_string(trace.start) +
                     ", cannot backpropagate to layer " + std::to_string(from_layer));
  }
  if (!std::holds_alternative<SoftmaxCrossEntropy>(net.layer(depth - 1).kind)) {
    throw StateError("backward needs a softmax_cross_entropy output layer");
  }
  LossResult lr = softmax_cross_entropy(trace.logits, labels);
  BackwardResult out;
  out.loss = lr.loss;
  out.grads.member.assign(depth, false);
  out.grads.grads.resize(depth);

  Tensor dy = std::move(lr.grad);
  for (std::size_t i = depth; i-- > from_layer;) {
    const Layer& layer = net.layer(i);
    const LayerRecord& rec = trace.records[i - trace.start];
    const Tensor& x = rec.input;
    const bool need_dx = i > from_layer;
    out.grads.member[i] = true;
    auto& g = out.grads.grads[i];
    Tensor dx;
    std::visit(
        Overloaded{
            [&](const Dense& d) {
              const std::size_t n = x.dim(0);
              const Tensor x2 = x.reshaped({n, d.in});
              Tensor db({d.out});
              for (std::size_t r = 0; r < n; ++r)
                for (std::size_t j = 0; j < d.out; ++j) db[j] += dy.at(r, j);
              g = {matmul_tn(dy, x2), std::move(db)};
              if (need_dx) dx = matmul(dy, layer.params[0]).reshaped(x.shape());
            },
            [&](const Conv2D& c) {
              Conv2dGrads cg =
                  conv2d_backward(x, layer.params[0], dy, {c.stride, c.pad}, need_dx);
              g = {std::move(cg.weight), std::move(cg.bias)};
              dx = std::move(cg.input);
            },
            [&](const ReLU&) {
              if (!need_dx) return;
              dx = Tensor(x.shape());
              for (std::size_t k = 0; k < x.size(); ++k) dx[k] = x[k] > 0.0 ? dy[k] : 0.0;
            },
            [&](const MaxPool&) {
              if (need_dx) dx = maxpool_backward(x.shape(), rec.argmax, dy);
            },
            [&](const Flatten&) {
              if (need_dx) dx = dy.reshaped(x.shape());
            },
            [&](const BatchNorm& bn) {
              const std::size_t n = x.dim(0), c = bn.channels;
              const std::size_t s = x.size() / (n * c);
              const double m = static_cast<double>(n * s);
              const Tensor& gamma = layer.params[0];
              Tensor dgamma({c}), dbeta({c});
              for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                  const std::size_t off = (r * c + ch) * s;
                  for (std::size_t j = 0; j < s; ++j) {
                    dgamma[ch] += dy[off + j] * rec.normalized[off + j];
                    dbeta[ch] += dy[off + j];
                  }
                }
              }
              if (need_dx) {
                dx = Tensor(x.shape());
                for (std::size_t r = 0; r < n; ++r) {
                  for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t off = (r * c + ch) * s;
                    const double k = gamma[ch] * rec.inv_std[ch] / m;
                    for (std::size_t j = 0; j < s; ++j) {
                      dx[off + j] = k * (m * dy[off + j] - dbeta[ch] -
                                         rec.normalized[off + j] * dgamma[ch]);
                    }
                  }
                }
              }
              g = {std::move(dgamma), std::move(dbeta)};
            },
            [&](const SoftmaxCrossEntropy&) {
              if (need_dx) dx = dy;
            },
        },
        layer.kind);
    dy = std::move(dx);
  }
  return out;
}

}  // namespace efl::nn
