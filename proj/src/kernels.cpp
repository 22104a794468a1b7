// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/kernels.hpp"

#include <algorithm>

namespace efl {
namespace {

struct ConvDims {
  std::size_t n, c, h, w, o, k, ho, wo;
};

ConvDims conv_dims(const Tensor& input, const Tensor& weight,
                   Conv2dGeometry geom) {
  if (input.rank() != 4 || weight.rank() != 4) {
    throw DimensionError("conv2d expects 4-D input and weight, got " +
                         shape_str(input.shape()) + " and " +
                         shape_str(weight.shape()));
  }
  if (weight.dim(1) != input.dim(1) || weight.dim(2) != weight.dim(3)) {
    throw DimensionError("conv2d weight " + shape_str(weight.shape()) +
                         " incompatible with input " + shape_str(input.shape()));
  }
  ConvDims d{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
             weight.dim(0), weight.dim(2), 0, 0};
  d.ho = conv_out_extent(d.h, d.k, geom.stride, geom.pad);
  d.wo = conv_out_extent(d.w, d.k, geom.stride, geom.pad);
  return d;
}

// Unfolds one sample into a (C*K*K) x (Ho*Wo) column matrix.
void im2col(const double* x, const ConvDims& d, Conv2dGeometry g, double* col) {
  const std::size_t plane = d.ho * d.wo;
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ki = 0; ki < d.k; ++ki) {
      for (std::size_t kj = 0; kj < d.k; ++kj) {
        double* row = col + ((c * d.k + ki) * d.k + kj) * plane;
        for (std::size_t oy = 0; oy < d.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < d.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 &&
                                iy < static_cast<std::ptrdiff_t>(d.h) &&
                                ix < static_cast<std::ptrdiff_t>(d.w);
            row[oy * d.wo + ox] = inside ? x[(c * d.h + iy) * d.w + ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const double* col, const ConvDims& d, Conv2dGeometry g, double* x) {
  const std::size_t plane = d.ho * d.wo;
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ki = 0; ki < d.k; ++ki) {
      for (std::size_t kj = 0; kj < d.k; ++kj) {
        const double* row = col + ((c * d.k + ki) * d.k + kj) * plane;
        for (std::size_t oy = 0; oy < d.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ki) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
          for (std::size_t ox = 0; ox < d.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kj) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
            x[(c * d.h + iy) * d.w + ix] += row[oy * d.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t kernel,
                            std::size_t stride, std::size_t pad) {
  if (stride == 0 || kernel == 0 || in + 2 * pad < kernel) {
    throw DimensionError("conv/pool window " + std::to_string(kernel) +
                         " (stride " + std::to_string(stride) + ", pad " +
                         std::to_string(pad) + ") does not fit extent " +
                         std::to_string(in));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weight,
                      const Tensor& bias, Conv2dGeometry geom) {
  const ConvDims d = conv_dims(input, weight, geom);
  if (bias.size() != d.o) {
    throw DimensionError("conv2d bias " + shape_str(bias.shape()) +
                         " does not match " + std::to_string(d.o) + " filters");
  }
  const std::size_t patch = d.c * d.k * d.k;
  const std::size_t plane = d.ho * d.wo;
  Tensor out({d.n, d.o, d.ho, d.wo});
  std::vector<double> col(patch * plane);
  for (std::size_t s = 0; s < d.n; ++s) {
    im2col(input.data() + s * d.c * d.h * d.w, d, geom, col.data());
    double* y = out.data() + s * d.o * plane;
    for (std::size_t o = 0; o < d.o; ++o) {
      double* yo = y + o * plane;
      std::fill(yo, yo + plane, bias[o]);
      const double* wrow = weight.data() + o * patch;
      for (std::size_t q = 0; q < patch; ++q) {
        const double wq = wrow[q];
        const double* crow = col.data() + q * plane;
        for (std::size_t p = 0; p < plane; ++p) yo[p] += wq * crow[p];
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weight,
                            const Tensor& grad_out, Conv2dGeometry geom,
                            bool want_input_grad) {
  const ConvDims d = conv_dims(input, weight, geom);
  const Shape expected{d.n, d.o, d.ho, d.wo};
  if (grad_out.shape() != expected) {
    throw DimensionError("conv2d grad_out " + shape_str(grad_out.shape()) +
                         " expected " + shape_str(expected));
  }
  const std::size_t patch = d.c * d.k * d.k;
  const std::size_t plane = d.ho * d.wo;
  Conv2dGrads g{want_input_grad ? Tensor(input.shape()) : Tensor(),
                Tensor(weight.shape()), Tensor({d.o})};
  std::vector<double> col(patch * plane);
  std::vector<double> dcol(want_input_grad ? patch * plane : 0);
  for (std::size_t s = 0; s < d.n; ++s) {
    im2col(input.data() + s * d.c * d.h * d.w, d, geom, col.data());
    const double* dy = grad_out.data() + s * d.o * plane;
    for (std::size_t o = 0; o < d.o; ++o) {
      const double* dyo = dy + o * plane;
      double bsum = 0.0;
      for (std::size_t p = 0; p < plane; ++p) bsum += dyo[p];
      g.bias[o] += bsum;
      double* gw = g.weight.data() + o * patch;
      for (std::size_t q = 0; q < patch; ++q) {
        const double* crow = col.data() + q * plane;
        double acc = 0.0;
        for (std::size_t p = 0; p < plane; ++p) acc += dyo[p] * crow[p];
        gw[q] += acc;
      }
    }
    if (!want_input_grad) continue;
    std::fill(dcol.begin(), dcol.end(), 0.0);
    for (std::size_t o = 0; o < d.o; ++o) {
      const double* dyo = dy + o * plane;
      const double* wrow = weight.data() + o * patch;
      for (std::size_t q = 0; q < patch; ++q) {
        const double wq = wrow[q];
        double* drow = dcol.data() + q * plane;
        for (std::size_t p = 0; p < plane; ++p) drow[p] += wq * dyo[p];
      }
    }
    col2im(dcol.data(), d, geom, g.input.data() + s * d.c * d.h * d.w);
  }
  return g;
}

MaxPoolResult maxpool_forward(const Tensor& input, std::size_t kernel,
                              std::size_t stride) {
  if (input.rank() != 4) {
    throw DimensionError("maxpool expects 4-D input, got " +
                         shape_str(input.shape()));
  }
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2),
                    w = input.dim(3);
  const std::size_t ho = conv_out_extent(h, kernel, stride, 0);
  const std::size_t wo = conv_out_extent(w, kernel, stride, 0);
  MaxPoolResult r{Tensor({n, c, ho, wo}), std::vector<std::size_t>(n * c * ho * wo)};
  std::size_t out_idx = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox, ++out_idx) {
        std::size_t best = base + (oy * stride) * w + ox * stride;
        for (std::size_t ki = 0; ki < kernel; ++ki) {
          for (std::size_t kj = 0; kj < kernel; ++kj) {
            const std::size_t idx = base + (oy * stride + ki) * w + ox * stride + kj;
            if (input[idx] > input[best]) best = idx;
          }
        }
        r.output[out_idx] = input[best];
        r.argmax[out_idx] = best;
      }
    }
  }
  return r;
}

Tensor maxpool_backward(const Shape& input_shape,
                        const std::vector<std::size_t>& argmax,
                        const Tensor& grad_out) {
  if (grad_out.size() != argmax.size()) {
    throw DimensionError("maxpool grad_out " + shape_str(grad_out.shape()) +
                         " does not match recorded argmax count " +
                         std::to_string(argmax.size()));
  }
  Tensor g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

}  // namespace efl
