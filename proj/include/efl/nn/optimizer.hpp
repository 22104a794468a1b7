// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "efl/nn/network.hpp"

namespace efl::nn {

/// Momentum SGD state. Velocities are created lazily at first use.
struct OptimizerState {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<std::vector<Tensor>> velocity;

  OptimizerState() = default;
  OptimizerState(double lr, double momentum, double weight_decay);
};

/// For member layers only: v <- m*v + g + wd*w;  w <- w - lr*v.
void sgd_step(Network& net, const GradientSet& grads, OptimizerState& opt);

struct LrCheck {
  bool satisfied = false;
  double bound = 0.0;
};

/// Largest admissible local learning rate for the partial-training
/// convergence bound: min(1/(tau*L), 1/(4*L*sqrt(tau*(tau-1)))), the second
/// term dropping out when tau == 1.
LrCheck check_lr_constraint(double lr, int tau, double l_max);

}  // namespace efl::nn
