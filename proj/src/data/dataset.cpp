// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/data/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "efl/rng.hpp"

namespace efl::data {

Shape Dataset::sample_shape() const {
  if (samples.rank() == 0) return {};
  return Shape(samples.shape().begin() + 1, samples.shape().end());
}

void Dataset::validate() const {
  if (num_classes <= 0) throw std::invalid_argument("dataset num_classes must be positive");
  if (samples.rank() < 2 || samples.dim(0) != labels.size()) {
    throw std::invalid_argument("dataset has " + std::to_string(labels.size()) +
                                " labels for samples " + shape_str(samples.shape()));
  }
  for (int l : labels) {
    if (l < 0 || l >= num_classes) {
      throw std::invalid_argument("label " + std::to_string(l) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  return Dataset{gather_rows(samples, indices), gather_labels(indices), num_classes};
}

Dataset Dataset::head(std::size_t n) const {
  n = std::min(n, size());
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return subset(idx);
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset synth_dataset(int num_classes, std::size_t n_per_class, std::size_t dim,
                      std::uint64_t seed) {
  if (num_classes <= 0 || n_per_class == 0 || dim == 0) {
    throw std::invalid_argument("synth_dataset arguments must be positive");
  }
  Rng rng(seed);
  const auto classes = static_cast<std::size_t>(num_classes);
  std::vector<double> means(classes * dim);
  for (auto& m : means) m = 3.0 * rng.normal();
  Dataset ds{Tensor({classes * n_per_class, dim}), {}, num_classes};
  ds.labels.reserve(classes * n_per_class);
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < n_per_class; ++i, ++row) {
      for (std::size_t d = 0; d < dim; ++d)
        ds.samples.at(row, d) = means[c * dim + d] + rng.normal();
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

namespace {

// Segments a..g of a seven-segment display.
constexpr std::array<std::uint8_t, 10> kDigitSegments = {
    0b0111111,  // 0: a b c d e f
    0b0000110,  // 1: b c
    0b1011011,  // 2: a b d e g
    0b1001111,  // 3: a b c d g
    0b1100110,  // 4: b c f g
    0b1101101,  // 5: a c d f g
    0b1111101,  // 6: a c d e f g
    0b0000111,  // 7: a b c
    0b1111111,  // 8
    0b1101111,  // 9: a b c d f g
};

struct Point {
  double x, y;
};

double segment_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

void render_digit(int digit, Rng& rng, const DigitStyle& style, double* pixels) {
  const double side = static_cast<double>(style.side);
  const double scale = side / 14.0;
  const double w = rng.uniform(5.0, 7.0) * scale;
  const double h = rng.uniform(9.0, 11.5) * scale;
  const double cx = side / 2.0 + rng.uniform(-1.5, 1.5) * scale;
  const double cy = side / 2.0 + rng.uniform(-1.0, 1.0) * scale;
  const double shear = rng.uniform(-0.25, 0.25);
  const double thick = rng.uniform(1.0, 1.8) * scale;
  // TL, TR, ML, MR, BL, BR
  std::array<Point, 6> corner = {Point{-w / 2, -h / 2}, Point{w / 2, -h / 2},
                                 Point{-w / 2, 0.0},    Point{w / 2, 0.0},
                                 Point{-w / 2, h / 2},  Point{w / 2, h / 2}};
  for (auto& c : corner) {
    c.x += rng.uniform(-0.6, 0.6) * scale;
    c.y += rng.uniform(-0.6, 0.6) * scale;
    c = Point{cx + c.x - shear * c.y, cy + c.y};
  }
  constexpr std::array<std::array<int, 2>, 7> kEnds = {{
      {0, 1},  // a
      {1, 3},  // b
      {3, 5},  // c
      {4, 5},  // d
      {2, 4},  // e
      {0, 2},  // f
      {2, 3},  // g
  }};
  std::array<double, 7> intensity{};
  const std::uint8_t lit = kDigitSegments[static_cast<std::size_t>(digit)];
  for (std::size_t s = 0; s < 7; ++s) {
    const bool on = (lit >> s) & 1U;
    const double u = rng.uniform();
    const bool draw = on ? u >= style.drop_segment : u < style.extra_segment;
    const double level = rng.uniform(0.7, 1.0);
    intensity[s] = draw ? level : 0.0;
  }
  for (std::size_t y = 0; y < style.side; ++y) {
    for (std::size_t x = 0; x < style.side; ++x) {
      const Point p{static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5};
      double v = 0.0;
      for (std::size_t s = 0; s < 7; ++s) {
        if (intensity[s] == 0.0) continue;
        const double d = segment_distance(p, corner[kEnds[s][0]], corner[kEnds[s][1]]);
        v = std::max(v, intensity[s] * std::clamp(thick / 2.0 + 0.5 - d, 0.0, 1.0));
      }
      v += style.pixel_noise * rng.normal();
      pixels[y * style.side + x] = std::clamp(v, 0.0, 1.0);
    }
  }
}

}  // namespace

Dataset synth_digits(std::size_t count, std::uint64_t seed, DigitStyle style) {
  if (count == 0 || style.side < 7) {
    throw std::invalid_argument("synth_digits needs count > 0 and side >= 7");
  }
  Rng rng(seed);
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = static_cast<int>(i % 10);
  rng.shuffle(std::span<int>(labels));
  const std::size_t pix = style.side * style.side;
  Dataset ds{Tensor({count, 1, style.side, style.side}), std::move(labels), 10};
  for (std::size_t i = 0; i < count; ++i)
    render_digit(ds.labels[i], rng, style, ds.samples.data() + i * pix);
  return ds;
}

}  // namespace efl::data
