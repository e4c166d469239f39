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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include "lrag/error.hpp"
#include "lrag/matrix.hpp"

namespace lrag {

inline constexpr double kDefaultSvdTol = 1e-10;
inline constexpr int kMaxJacobiSweeps = 60;

/// Thin SVD, w = u * diag(sigma) * v^T with r = min(rows, cols).
struct SvdResult {
  Matrix u;             // m x r, orthonormal columns
  std::vector<double> sigma;  // descending, non-negative
  Matrix v;             // n x r, orthonormal columns
};

/// Singular values in descending order.
struct SingularSpectrum {
  std::vector<double> values;
};

namespace detail {

// One-sided (Hestenes) Jacobi on the columns of a tall matrix. `cols` holds the
// n columns of A (each of length m >= n); `vcols`, when non-null, accumulates
// the right rotations. Returns after the first sweep with no rotation.
inline void jacobi_orthogonalize(std::vector<Vector>& cols, std::vector<Vector>* vcols, double tol) {
  const std::size_t n = cols.size();
  for (int sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        Vector& ap = cols[p];
        Vector& aq = cols[q];
        const double alpha = dot(ap, ap);
        const double beta = dot(aq, aq);
        const double gamma = dot(ap, aq);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < ap.size(); ++i) {
          const double x = ap[i], y = aq[i];
          ap[i] = c * x - s * y;
          aq[i] = s * x + c * y;
        }
        if (vcols) {
          Vector& vp = (*vcols)[p];
          Vector& vq = (*vcols)[q];
          for (std::size_t i = 0; i < vp.size(); ++i) {
            const double x = vp[i], y = vq[i];
            vp[i] = c * x - s * y;
            vq[i] = s * x + c * y;
          }
        }
      }
    }
    if (!rotated) return;
  }
  fail(ErrorCode::NoConvergence, "Jacobi SVD did not converge in " + std::to_string(kMaxJacobiSweeps) + " sweeps");
}

inline std::vector<Vector> columns_of_tall(const Matrix& w, bool transpose) {
  // Columns of w (or of w^T) as separate vectors.
  const std::size_t n = transpose ? w.rows : w.cols;
  const std::size_t m = transpose ? w.cols : w.rows;
  std::vector<Vector> cols(n, Vector(m));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) cols[j][i] = transpose ? w(j, i) : w(i, j);
  return cols;
}

inline std::vector<std::size_t> descending_order(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  return order;
}

// Fills zero columns of an m x r matrix so that all columns are orthonormal.
inline void complete_orthonormal(Matrix& u, const std::vector<bool>& filled) {
  const std::size_t m = u.rows;
  std::size_t basis = 0;
  for (std::size_t j = 0; j < u.cols; ++j) {
    if (filled[j]) continue;
    std::vector<bool> now_filled = filled;
    for (; basis < m; ++basis) {
      Vector cand(m, 0.0);
      cand[basis] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < u.cols; ++k) {
          if (k == j) continue;
          Vector uk = u.column(k);
          const double proj = dot(uk, cand);
          axpy(-proj, uk, cand);
        }
      }
      const double nrm = norm2(cand);
      if (nrm > 0.5) {
        for (std::size_t i = 0; i < m; ++i) u(i, j) = cand[i] / nrm;
        ++basis;
        break;
      }
    }
  }
}

}  // namespace detail

/// Full thin SVD by one-sided Jacobi, run on the taller orientation.
inline SvdResult svd(const Matrix& w, double tol = kDefaultSvdTol) {
  require(w.rows >= 1 && w.cols >= 1, ErrorCode::ShapeMismatch, "svd of an empty matrix");
  require(w.all_finite(), ErrorCode::InvalidValue, "svd input has non-finite entries");
  const bool transpose = w.rows < w.cols;
  const std::size_t m = transpose ? w.cols : w.rows;
  const std::size_t n = transpose ? w.rows : w.cols;

  auto cols = detail::columns_of_tall(w, transpose);
  std::vector<Vector> vcols(n, Vector(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) vcols[j][j] = 1.0;
  detail::jacobi_orthogonalize(cols, &vcols, tol);

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = norm2(cols[j]);
  const auto order = detail::descending_order(norms);

  Matrix left(m, n), right(n, n);
  std::vector<double> sigma(n);
  std::vector<bool> filled(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    sigma[k] = norms[j];
    if (sigma[k] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) left(i, k) = cols[j][i] / sigma[k];
      filled[k] = true;
    }
    for (std::size_t i = 0; i < n; ++i) right(i, k) = vcols[j][i];
  }
  detail::complete_orthonormal(left, filled);

  if (transpose) return {std::move(right), std::move(sigma), std::move(left)};
  return {std::move(left), std::move(sigma), std::move(right)};
}

/// Singular values only; identical arithmetic to svd() without accumulating V.
inline SingularSpectrum singular_values(const Matrix& w, double tol = kDefaultSvdTol) {
  require(w.rows >= 1 && w.cols >= 1, ErrorCode::ShapeMismatch, "singular values of an empty matrix");
  require(w.all_finite(), ErrorCode::InvalidValue, "input has non-finite entries");
  if (std::all_of(w.data.begin(), w.data.end(), [](double v) { return v == 0.0; }))
    fail(ErrorCode::ZeroMatrix, "singular values of a zero matrix");
  const bool transpose = w.rows < w.cols;
  auto cols = detail::columns_of_tall(w, transpose);
  detail::jacobi_orthogonalize(cols, nullptr, tol);
  std::vector<double> norms(cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) norms[j] = norm2(cols[j]);
  std::sort(norms.begin(), norms.end(), std::greater<>());
  return {std::move(norms)};
}

inline Vector softmax(std::span<const double> scores) {
  require(!scores.empty(), ErrorCode::EmptyInput, "softmax of an empty vector");
  const double mx = *std::max_element(scores.begin(), scores.end());
  Vector out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

/// log(sum(exp(scores))) with max subtraction.
inline double log_sum_exp(std::span<const double> scores) {
  require(!scores.empty(), ErrorCode::EmptyInput, "logsumexp of an empty vector");
  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - mx);
  return mx + std::log(sum);
}

/// Natural-log Shannon entropy with 0 log 0 = 0.
inline double entropy(std::span<const double> p) {
  require(!p.empty(), ErrorCode::EmptyInput, "entropy of an empty vector");
  double sum = 0.0;
  for (double v : p) {
    require(v >= 0.0 && std::isfinite(v), ErrorCode::InvalidValue, "probability entries must be finite and >= 0");
    sum += v;
  }
  require(std::abs(sum - 1.0) <= 1e-6, ErrorCode::NotNormalized, "probabilities sum to " + std::to_string(sum));
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2))); }

inline double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * (1.0 / std::numbers::sqrt2)));
  const double pdf = std::exp(-0.5 * x * x) * 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  return cdf + x * pdf;
}

}  // namespace lrag
