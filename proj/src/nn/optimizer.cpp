// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/nn/optimizer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace efl::nn {

OptimizerState::OptimizerState(double lr_, double momentum_, double weight_decay_)
    : lr(lr_), momentum(momentum_), weight_decay(weight_decay_) {
  if (!(lr >= 0.0)) throw std::invalid_argument("learning rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0))
    throw std::invalid_argument("weight decay must be non-negative");
}

void sgd_step(Network& net, const GradientSet& grads, OptimizerState& opt) {
  const std::size_t depth = net.num_layers();
  if (grads.member.size() != depth || grads.grads.size() != depth) {
    throw DimensionError("gradient set covers " + std::to_string(grads.member.size()) +
                         " layers, network has " + std::to_string(depth));
  }
  if (grads.num_members() == 0) return;
  if (opt.velocity.size() != depth) opt.velocity.resize(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    if (!grads.member[i]) continue;
    const auto& g = grads.grads[i];
    if (g.size() != net.params(i).size()) {
      throw DimensionError("layer " + std::to_string(i) + " gradient count mismatch");
    }
    if (g.empty()) continue;
    auto& params = net.mutable_params(i);
    auto& vel = opt.velocity[i];
    if (vel.empty()) {
      for (const auto& p : params) vel.emplace_back(p.shape());
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (g[p].shape() != params[p].shape() || vel[p].shape() != params[p].shape()) {
        throw DimensionError("layer " + std::to_string(i) + " gradient " +
                             shape_str(g[p].shape()) + " vs parameter " +
                             shape_str(params[p].shape()));
      }
      double* w = params[p].data();
      double* v = vel[p].data();
      const double* gp = g[p].data();
      for (std::size_t k = 0; k < params[p].size(); ++k) {
        v[k] = opt.momentum * v[k] + gp[k] + opt.weight_decay * w[k];
        w[k] -= opt.lr * v[k];
      }
    }
  }
}

LrCheck check_lr_constraint(double lr, int tau, double l_max) {
  if (tau < 1) throw std::invalid_argument("tau must be at least 1");
  if (!(l_max > 0.0)) throw std::invalid_argument("l_max must be positive");
  const double t = static_cast<double>(tau);
  const double first = 1.0 / (t * l_max);
  const double second = tau == 1 ? std::numeric_limits<double>::infinity()
                                 : 1.0 / (4.0 * l_max * std::sqrt(t * (t - 1.0)));
  const double bound = std::min(first, second);
  return {lr <= bound, bound};
}

}  // namespace efl::nn
