// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "efl/fedsim/client.hpp"
#include "efl/nn/network.hpp"

namespace efl::fedsim {

struct WidthReduction {
  nn::Network subnet;
  IndexMap map;
};

/// Keeps the first ceil(keep_fraction * width) output units of every Conv2D
/// and hidden Dense layer (and the matching BatchNorm channels), slicing
/// weights on both the input and output side. Input channels and the final
/// classifier's outputs are never reduced. The sub-network starts from the
/// sliced global values.
WidthReduction width_reduce(const nn::Network& net, double keep_fraction);

/// Kept units for a layer of width `width`.
std::size_t reduced_width(std::size_t width, double keep_fraction);

}  // namespace efl::fedsim
