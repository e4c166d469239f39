/* Copyright 2026 The lrag Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

// Synthetic weight matrices with prescribed singular spectra, used to build
// layer stacks whose TD profile is known in advance.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lrag/error.hpp"
#include "lrag/matrix.hpp"
#include "lrag/rng.hpp"
#include "lrag/td_analysis.hpp"
#include "lrag/tensor_store.hpp"

namespace lrag::synth {

/// m x k matrix with orthonormal columns (k <= m), from Gram-Schmidt on a
/// Gaussian draw.
inline Matrix random_orthonormal_columns(std::size_t m, std::size_t k, Rng& rng) {
  require(k <= m, ErrorCode::ShapeMismatch, "cannot fit " + std::to_string(k) + " orthonormal columns in R^" +
                                                std::to_string(m));
  std::vector<Vector> cols;
  while (cols.size() < k) {
    Vector c = rng.gaussian_vector(m, 1.0);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& q : cols) axpy(-dot(q, c), q, c);
    const double n = norm2(c);
    if (n < 1e-6) continue;
    for (double& x : c) x /= n;
    cols.push_back(std::move(c));
  }
  Matrix q(m, k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t i = 0; i < m; ++i) q(i, j) = cols[j][i];
  return q;
}

/// U diag(sigma) V^T with random orthonormal U (m x r) and V (n x r).
inline Matrix matrix_with_spectrum(std::size_t m, std::size_t n, const std::vector<double>& sigma, Rng& rng) {
  const std::size_t r = sigma.size();
  require(r <= std::min(m, n), ErrorCode::ShapeMismatch, "spectrum longer than min(m, n)");
  const Matrix u = random_orthonormal_columns(m, r, rng);
  const Matrix v = random_orthonormal_columns(n, r, rng);
  Matrix w(m, n);
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t i = 0; i < m; ++i) {
      const double us = u(i, k) * sigma[k];
      for (std::size_t j = 0; j < n; ++j) w(i, j) += us * v(j, k);
    }
  return w;
}

/// Geometric spectrum exp(-beta * i), i = 0..r-1, with beta chosen by
/// bisection so that its TD equals `target`, clamped to [0, ln r].
inline std::vector<double> spectrum_with_entropy(std::size_t r, double target) {
  require(r >= 1, ErrorCode::InvalidSpec, "spectrum length must be >= 1");
  auto make = [r](double beta) {
    std::vector<double> s(r);
    for (std::size_t i = 0; i < r; ++i) s[i] = std::exp(-beta * static_cast<double>(i));
    return s;
  };
  const double max_h = std::log(static_cast<double>(r));
  if (target >= max_h) return std::vector<double>(r, 1.0);
  if (target <= 0.0) {
    std::vector<double> s(r, 0.0);
    s[0] = 1.0;
    return s;
  }
  double lo = 0.0, hi = 1.0;
  while (transformation_divergence(make(hi)) > target) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (transformation_divergence(make(mid)) > target) lo = mid;
    else hi = mid;
  }
  return make(0.5 * (lo + hi));
}

/// Per-layer TD targets following a three-block pattern with optional
/// uniform noise of the given amplitude.
inline std::vector<double> three_block_targets(std::size_t n_layers, std::size_t extract_end, std::size_t process_end,
                                               double high, double low, double final_level, double noise, Rng& rng) {
  require(0 < extract_end && extract_end < process_end && process_end < n_layers, ErrorCode::InvalidSpec,
          "block boundaries must satisfy 0 < a < b < n_layers");
  std::vector<double> t(n_layers);
  for (std::size_t i = 0; i < n_layers; ++i) {
    const double base = i < extract_end ? high : (i < process_end ? low : final_level);
    t[i] = base + (noise > 0.0 ? rng.uniform(-noise, noise) : 0.0);
  }
  return t;
}

/// Square `dim` x `dim` W_v matrices named by `pattern`, one per target TD.
inline TensorStore spectral_layer_store(const std::vector<double>& targets, std::size_t dim, Rng& rng,
                                        const std::string& pattern = "layer.{}.w_v") {
  const LayerPattern names(pattern);
  TensorStore store;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    Rng layer_rng = rng.split(i);
    store.put(names.name_for(i), matrix_with_spectrum(dim, dim, spectrum_with_entropy(dim, targets[i]), layer_rng));
  }
  store.metadata["kind"] = "spectral";
  return store;
}

}  // namespace lrag::synth
