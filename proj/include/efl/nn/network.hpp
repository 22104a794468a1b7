// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "efl/rng.hpp"
#include "efl/tensor.hpp"

namespace efl::nn {

enum class Mode { Train, Eval };

/// Static: running statistics stay at their initial values for the whole
/// run and every batch, in either mode, is normalized by its own moments.
/// Global: running statistics track batch statistics in Train mode and
/// are averaged at aggregation.
enum class BnMode { Static, Global };

struct Dense {
  std::size_t in = 0, out = 0;
};
struct Conv2D {
  std::size_t in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;
};
struct ReLU {};
struct MaxPool {
  std::size_t kernel = 2, stride = 2;
};
struct Flatten {};
struct BatchNorm {
  std::size_t channels = 0;
  BnMode mode = BnMode::Global;
};
struct SoftmaxCrossEntropy {};

using LayerKind =
    std::variant<Dense, Conv2D, ReLU, MaxPool, Flatten, BatchNorm, SoftmaxCrossEntropy>;

std::string kind_name(const LayerKind& kind);

inline constexpr double kBnEpsilon = 1e-5;
inline constexpr double kBnMomentum = 0.1;

class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Declarative layer. Consecutive layers sharing a non-empty `block` name
/// form one block; split points may not fall inside a block.
struct LayerSpec {
  std::string name;
  LayerKind kind;
  std::string block;
};

struct Layer {
  std::string name;
  LayerKind kind;
  std::string block;
  std::vector<Tensor> params;   // Dense/Conv2D: weight, bias. BatchNorm: gamma, beta.
  std::vector<Tensor> buffers;  // BatchNorm: running mean, running var.
};

/// Names of the parameter / buffer slots, used for checkpoints.
std::vector<std::string> param_names(const LayerKind& kind);
std::vector<std::string> buffer_names(const LayerKind& kind);

class Network {
 public:
  /// Validates adjacent-layer shape compatibility. Parameters start at zero,
  /// BatchNorm gamma and running variance at one.
  Network(Shape input_shape, std::vector<LayerSpec> specs,
          std::size_t split_index = 0);

  /// Fan-in scaled (He) uniform weights, zero biases, gamma=1, beta=0.
  void initialize(Rng& rng);

  const Shape& input_shape() const noexcept { return input_shape_; }
  /// Per-sample shape entering layer `i` (i == num_layers gives the output).
  const Shape& shape_before(std::size_t i) const { return shapes_.at(i); }
  std::size_t num_layers() const noexcept { return layers_.size(); }

  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  const std::vector<Tensor>& params(std::size_t i) const { return layers_.at(i).params; }
  const std::vector<Tensor>& buffers(std::size_t i) const { return layers_.at(i).buffers; }

  /// Mutable parameter access invalidates outstanding activation traces.
  std::vector<Tensor>& mutable_params(std::size_t i);
  std::vector<Tensor>& mutable_buffers(std::size_t i) { return layers_.at(i).buffers; }

  std::size_t split_index() const noexcept { return split_index_; }
  void set_split_index(std::size_t k);

  bool is_block_boundary(std::size_t k) const;
  std::vector<std::size_t> block_boundaries() const;

  std::uint64_t version() const noexcept { return version_; }

  std::vector<LayerSpec> specs() const;
  std::size_t num_classes() const;

  /// Parameter count of layers [from, num_layers).
  std::size_t parameter_count(std::size_t from = 0) const;
  /// Activations held for a batch by layers [from, num_layers): the output
  /// of every layer except the loss layer, times the batch size.
  std::size_t activation_count(std::size_t from, std::size_t batch) const;

 private:
  Shape input_shape_;
  std::vector<Shape> shapes_;
  std::vector<Layer> layers_;
  std::size_t split_index_ = 0;
  std::uint64_t version_ = 0;
};

/// Intermediates recorded by a forward pass, consumed by backward.
struct LayerRecord {
  Tensor input;
  Tensor normalized;                // BatchNorm x-hat
  std::vector<double> inv_std;      // BatchNorm 1/sqrt(var + eps)
  std::vector<std::size_t> argmax;  // MaxPool
};

struct ActivationTrace {
  std::size_t start = 0;
  std::uint64_t version = 0;
  Mode mode = Mode::Train;
  const Network* owner = nullptr;
  std::vector<LayerRecord> records;  // layers [start, num_layers)
  Tensor logits;
};

struct ForwardResult {
  Tensor logits;
  ActivationTrace trace;
};

/// Runs layers [start, num_layers). In Train mode BatchNorm normalizes by
/// batch statistics and, for Global BatchNorm, updates running statistics.
/// Eval-mode Global BatchNorm uses the running statistics instead.
ForwardResult forward_from(Network& net, const Tensor& input, std::size_t start,
                           Mode mode);

inline ForwardResult forward(Network& net, const Tensor& batch, Mode mode) {
  return forward_from(net, batch, 0, mode);
}

/// Eval-mode pass over layers [begin, end) without recording a trace.
Tensor infer_range(const Network& net, const Tensor& input, std::size_t begin,
                   std::size_t end);

inline Tensor infer(const Network& net, const Tensor& batch) {
  return infer_range(net, batch, 0, net.num_layers());
}

/// Per-layer gradients; `member[i]` marks layers that carry gradient data.
struct GradientSet {
  std::vector<bool> member;
  std::vector<std::vector<Tensor>> grads;

  std::size_t num_members() const;
};

struct BackwardResult {
  GradientSet grads;
  double loss = 0.0;
};

/// Mean softmax cross-entropy and its gradient with respect to the logits.
struct LossResult {
  double loss = 0.0;
  Tensor grad;
};
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Backpropagates through layers [from_layer, num_layers). Error signals are
/// not propagated below `from_layer`.
BackwardResult backward(const Network& net, const ActivationTrace& trace,
                        std::span<const int> labels, std::size_t from_layer);

}  // namespace efl::nn
