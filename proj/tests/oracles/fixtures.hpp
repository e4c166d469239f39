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

// Seeded instances shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <vector>

#include "lrag/rep_retriever.hpp"
#include "lrag/rng.hpp"

namespace fixture {

struct RetrievalTask {
  std::vector<lrag::Vector> reps;
  std::vector<std::vector<std::size_t>> positives;
  lrag::Matrix doc_embeddings;
};

inline void normalize_row(lrag::Matrix& m, std::size_t r) {
  double n = 0.0;
  for (std::size_t j = 0; j < m.cols; ++j) n += m(r, j) * m(r, j);
  n = std::sqrt(n);
  for (std::size_t j = 0; j < m.cols; ++j) m(r, j) /= n;
}

/// Rep i's positive is doc i, a noisy unit-norm image of rep i under a fixed
/// random linear map. The remaining docs are random unit distractors.
inline RetrievalTask separable_task(std::uint64_t seed, std::size_t n_reps = 64, std::size_t n_docs = 256,
                                    std::size_t d_model = 64, std::size_t d_emb = 32, double noise = 0.1) {
  lrag::Rng rng = lrag::Rng(seed).split("separable");
  const lrag::Matrix map = rng.split("map").gaussian_matrix(d_model, d_emb, 1.0 / std::sqrt(double(d_model)));
  RetrievalTask t;
  t.doc_embeddings = lrag::Matrix(n_docs, d_emb);
  lrag::Rng rep_rng = rng.split("reps"), doc_rng = rng.split("docs");
  for (std::size_t i = 0; i < n_reps; ++i) {
    lrag::Vector r(d_model);
    for (double& v : r) v = rep_rng.normal(1.0);
    for (std::size_t e = 0; e < d_emb; ++e) {
      double s = 0.0;
      for (std::size_t a = 0; a < d_model; ++a) s += r[a] * map(a, e);
      t.doc_embeddings(i, e) = s + doc_rng.normal(noise);
    }
    normalize_row(t.doc_embeddings, i);
    t.reps.push_back(std::move(r));
    t.positives.push_back({i});
  }
  for (std::size_t i = n_reps; i < n_docs; ++i) {
    for (std::size_t e = 0; e < d_emb; ++e) t.doc_embeddings(i, e) = doc_rng.normal(1.0);
    normalize_row(t.doc_embeddings, i);
  }
  return t;
}

/// Random batch with 1-2 positives per rep and unit-norm documents.
inline lrag::TrainBatch random_batch(lrag::Rng& rng, std::size_t n, std::size_t m, std::size_t d_model,
                                     std::size_t d_emb) {
  lrag::TrainBatch b;
  b.doc_embeddings = lrag::Matrix(m, d_emb);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t e = 0; e < d_emb; ++e) b.doc_embeddings(j, e) = rng.normal(1.0);
    normalize_row(b.doc_embeddings, j);
  }
  for (std::size_t i = 0; i < n; ++i) {
    lrag::Vector r(d_model);
    for (double& v : r) v = rng.normal(1.0);
    b.reps.push_back(std::move(r));
    std::vector<std::size_t> pos = {rng.below(m)};
    if (rng.below(2) == 1 && m > 1) pos.push_back((pos[0] + 1 + rng.below(m - 1)) % m);
    b.positives.push_back(std::move(pos));
  }
  return b;
}

struct GradientCheck {
  double worst_relative = 0.0;
  std::size_t parameters = 0;
};

/// Compares analytic gradients with central differences on every parameter.
/// The relative error of one parameter is |a - f| / max(|a|, |f|), taken as
/// 0 when both are exactly 0.
inline GradientCheck check_gradients(const lrag::MlpAdapter& g, const lrag::TrainBatch& batch, double tau,
                                     lrag::LossForm form, double step = 1e-5) {
  const lrag::AdapterGradients analytic = lrag::loss_gradients(g, batch, tau, form).grads;
  GradientCheck out;
  auto visit = [&](std::vector<double> lrag::MlpAdapter::*vec_member, const std::vector<double>& grads) {
    lrag::MlpAdapter probe = g;
    std::vector<double>& params = probe.*vec_member;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = params[i];
      params[i] = saved + step;
      const double up = lrag::infonce_batch(probe, batch, tau, form);
      params[i] = saved - step;
      const double down = lrag::infonce_batch(probe, batch, tau, form);
      params[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double a = grads[i];
      const double scale = std::max(std::abs(a), std::abs(fd));
      if (scale > 0.0) out.worst_relative = std::max(out.worst_relative, std::abs(a - fd) / scale);
      ++out.parameters;
    }
  };
  auto visit_matrix = [&](lrag::Matrix lrag::MlpAdapter::*mat_member, const lrag::Matrix& grads) {
    lrag::MlpAdapter probe = g;
    std::vector<double>& params = (probe.*mat_member).data;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = params[i];
      params[i] = saved + step;
      const double up = lrag::infonce_batch(probe, batch, tau, form);
      params[i] = saved - step;
      const double down = lrag::infonce_batch(probe, batch, tau, form);
      params[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double a = grads.data[i];
      const double scale = std::max(std::abs(a), std::abs(fd));
      if (scale > 0.0) out.worst_relative = std::max(out.worst_relative, std::abs(a - fd) / scale);
      ++out.parameters;
    }
  };
  visit_matrix(&lrag::MlpAdapter::w1, analytic.w1);
  visit(&lrag::MlpAdapter::b1, analytic.b1);
  visit_matrix(&lrag::MlpAdapter::w2, analytic.w2);
  visit(&lrag::MlpAdapter::b2, analytic.b2);
  return out;
}

/// Means of consecutive non-overlapping windows; a trailing partial window is
/// dropped.
inline std::vector<double> window_means(const std::vector<double>& v, std::size_t w) {
  std::vector<double> out;
  for (std::size_t s = 0; s + w <= v.size(); s += w) {
    double m = 0.0;
    for (std::size_t i = s; i < s + w; ++i) m += v[i];
    out.push_back(m / static_cast<double>(w));
  }
  return out;
}

}  // namespace fixture
