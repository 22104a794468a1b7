// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "efl/tensor.hpp"

namespace efl {

struct Conv2dGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

std::size_t conv_out_extent(std::size_t in, std::size_t kernel,
                            std::size_t stride, std::size_t pad);

/// input (N,C,H,W), weight (O,C,K,K), bias (O) -> (N,O,Ho,Wo).
Tensor conv2d_forward(const Tensor& input, const Tensor& weight,
                      const Tensor& bias, Conv2dGeometry geom);

struct Conv2dGrads {
  Tensor input;  // empty when not requested
  Tensor weight;
  Tensor bias;
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight,
                            const Tensor& grad_out, Conv2dGeometry geom,
                            bool want_input_grad = true);

struct MaxPoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

/// Unpadded max pooling over (N,C,H,W). Ties resolve to the first maximum
/// in row-major window order.
MaxPoolResult maxpool_forward(const Tensor& input, std::size_t kernel,
                              std::size_t stride);

Tensor maxpool_backward(const Shape& input_shape,
                        const std::vector<std::size_t>& argmax,
                        const Tensor& grad_out);

}  // namespace efl
