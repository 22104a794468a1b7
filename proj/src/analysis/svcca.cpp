// Copyright 2026 The EmbraceFL Authors
// SPDX-License-Identifier: Apache-2.0

#include "efl/analysis/svcca.hpp"

#include <algorithm>
#include <stdexcept>

#include "efl/linalg.hpp"

namespace efl::analysis {
namespace {

Tensor centered(const Tensor& m) {
  const Tensor mu = mean_axis(m, 1);
  Tensor out = m;
  for (std::size_t i = 0; i < m.dim(0); ++i)
    for (std::size_t j = 0; j < m.dim(1); ++j) out.at(i, j) -= mu[i];
  return out;
}

// Rows of diag(s) * vt for the leading min(k, numerical rank) directions.
Tensor top_directions(const Tensor& centered_matrix, std::size_t k) {
  const SvdResult f = svd(centered_matrix);
  const double cutoff = f.s.empty() ? 0.0 : f.s.front() * 1e-10;
  std::size_t rank = 0;
  while (rank < f.s.size() && f.s[rank] > cutoff && f.s[rank] > 0.0) ++rank;
  const std::size_t keep = std::min(k, rank);
  const std::size_t n = centered_matrix.dim(1);
  Tensor p({keep, n});
  for (std::size_t r = 0; r < keep; ++r)
    for (std::size_t j = 0; j < n; ++j) p.at(r, j) = f.s[r] * f.vt.at(r, j);
  return p;
}

Tensor covariance(const Tensor& a, const Tensor& b) {
  Tensor c = matmul_nt(a, b);
  const double denom = static_cast<double>(a.dim(1) - 1);
  for (auto& v : c.values()) v /= denom;
  return c;
}

// The projections are already truncated to their numerical rank, so the
// ridge only needs to stabilize the inverse square root. Scaling it to the
// smallest retained variance bounds its relative bias on every direction.
double ridge_for(const Tensor& cov) {
  double smallest = 0.0;
  for (std::size_t i = 0; i < cov.dim(0); ++i) {
    const double v = cov.at(i, i);
    if (v > 0.0 && (smallest == 0.0 || v < smallest)) smallest = v;
  }
  return kCovarianceRidge * (smallest > 0.0 ? smallest : 1.0);
}

void check_matrix(const ActivationMatrix& m, const char* which) {
  if (m.matrix.rank() != 2 || m.matrix.dim(0) == 0) {
    throw DimensionError(std::string("svcca ") + which +
                         " must be a non-empty neurons x samples matrix, got " +
                         shape_str(m.matrix.shape()));
  }
  require_finite(m.matrix, std::string("svcca ") + which);
}

}  // namespace

SvccaResult svcca(const ActivationMatrix& x, const ActivationMatrix& y, std::size_t k) {
  check_matrix(x, "x");
  check_matrix(y, "y");
  if (k == 0) throw std::invalid_argument("svcca k must be at least 1");
  const std::size_t n = x.matrix.dim(1);
  if (y.matrix.dim(1) != n) {
    throw DimensionError("svcca sample counts differ: " + std::to_string(n) + " vs " +
                         std::to_string(y.matrix.dim(1)));
  }
  if (n < 2) throw DimensionError("svcca needs at least two samples");

  const Tensor px = top_directions(centered(x.matrix), k);
  const Tensor py = top_directions(centered(y.matrix), k);
  SvccaResult r;
  r.k_requested = k;
  r.k_used = std::min(px.dim(0), py.dim(0));
  if (r.k_used == 0) return r;  // a constant input carries no signal

  const Tensor sxx = covariance(px, px);
  const Tensor syy = covariance(py, py);
  const Tensor sxy = covariance(px, py);
  const Tensor wx = inverse_sqrt_psd(sxx, ridge_for(sxx));
  const Tensor wy = inverse_sqrt_psd(syy, ridge_for(syy));
  const SvdResult f = svd(matmul(matmul(wx, sxy), wy));
  double total = 0.0;
  for (std::size_t i = 0; i < r.k_used; ++i) {
    const double rho = std::clamp(f.s[i], 0.0, 1.0);
    r.correlations.push_back(rho);
    total += rho;
  }
  r.value = total / static_cast<double>(r.k_used);
  return r;
}

double pairwise_max_svcca(std::span<const ActivationMatrix> mats, std::size_t k) {
  if (mats.size() < 2) {
    throw std::invalid_argument("pairwise_max_svcca needs at least two matrices");
  }
  double best = 0.0;
  for (std::size_t i = 0; i < mats.size(); ++i)
    for (std::size_t j = i + 1; j < mats.size(); ++j)
      best = std::max(best, svcca(mats[i], mats[j], k).value);
  return best;
}

double batched_svcca(std::span<const ActivationMatrix> x_batches,
                     std::span<const ActivationMatrix> y_batches, std::size_t k) {
  if (x_batches.empty()) throw std::invalid_argument("batched_svcca needs at least one batch");
  if (x_batches.size() != y_batches.size()) {
    throw std::invalid_argument("batched_svcca batch counts differ");
  }
  double total = 0.0;
  for (std::size_t b = 0; b < x_batches.size(); ++b)
    total += svcca(x_batches[b], y_batches[b], k).value;
  return total / static_cast<double>(x_batches.size());
}

std::vector<ActivationMatrix> layer_activations(const nn::Network& net,
                                                const Tensor& inputs,
                                                std::span<const std::size_t> layers) {
  std::vector<ActivationMatrix> out;
  if (layers.empty()) return out;
  const std::size_t last = *std::max_element(layers.begin(), layers.end());
  if (last >= net.num_layers()) {
    throw std::invalid_argument("layer index " + std::to_string(last) +
                                " beyond network depth");
  }
  const std::size_t n = inputs.dim(0);
  Tensor x = inputs;
  for (std::size_t i = 0; i <= last; ++i) {
    x = nn::infer_range(net, x, i, i + 1);
    if (std::find(layers.begin(), layers.end(), i) == layers.end()) continue;
    const Shape& s = net.shape_before(i + 1);
    const std::size_t neurons = s.front();
    const std::size_t spatial = shape_numel(s) / neurons;
    Tensor m({neurons, n});
    for (std::size_t sample = 0; sample < n; ++sample) {
      const double* row = x.data() + sample * neurons * spatial;
      for (std::size_t c = 0; c < neurons; ++c) {
        double acc = 0.0;
        for (std::size_t p = 0; p < spatial; ++p) acc += row[c * spatial + p];
        m.at(c, sample) = acc / static_cast<double>(spatial);
      }
    }
    out.push_back({net.layer(i).name, std::move(m)});
  }
  // Preserve the caller's order.
  std::vector<ActivationMatrix> ordered;
  for (auto idx : layers) {
    const std::string& name = net.layer(idx).name;
    auto it = std::find_if(out.begin(), out.end(),
                           [&](const ActivationMatrix& a) { return a.layer == name; });
    ordered.push_back(*it);
  }
  return ordered;
}

std::vector<std::size_t> weight_layers(const nn::Network& net) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const auto& kind = net.layer(i).kind;
    if (std::holds_alternative<nn::Dense>(kind) || std::holds_alternative<nn::Conv2D>(kind))
      out.push_back(i);
  }
  return out;
}

}  // namespace efl::analysis
