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

// Representation retriever: an MLP adapter g maps an intermediate hidden
// state r into the frozen encoder's space, and documents are scored by
//
//   s(r, d) = f(g(r))^T f(d)
//
// where f(g(r)) is g(r) passed through the encoder's output transform (L2
// normalization). g is trained with InfoNCE using hand-derived gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lrag/error.hpp"
#include "lrag/linalg.hpp"
#include "lrag/matrix.hpp"
#include "lrag/retrieval.hpp"
#include "lrag/rng.hpp"
#include "lrag/tensor_store.hpp"

namespace lrag {

struct MlpAdapter {
  Matrix w1;  // d_model x d_hidden
  Vector b1;
  Matrix w2;  // d_hidden x d_emb
  Vector b2;

  std::size_t d_model() const { return w1.rows; }
  std::size_t d_hidden() const { return w1.cols; }
  std::size_t d_emb() const { return w2.cols; }

  bool operator==(const MlpAdapter&) const = default;
};

/// Gradients share the adapter's layout.
using AdapterGradients = MlpAdapter;

inline MlpAdapter init_adapter(std::size_t d_model, std::size_t d_hidden, std::size_t d_emb, std::uint64_t seed,
                               double stddev = 0.02) {
  require(d_model >= 1 && d_hidden >= 1 && d_emb >= 1, ErrorCode::InvalidConfig, "adapter dims must be >= 1");
  const Rng rng = Rng(seed).split("adapter");
  return {rng.split("w1").gaussian_matrix(d_model, d_hidden, stddev), Vector(d_hidden, 0.0),
          rng.split("w2").gaussian_matrix(d_hidden, d_emb, stddev), Vector(d_emb, 0.0)};
}

inline MlpAdapter zero_like(const MlpAdapter& g) {
  return {Matrix(g.w1.rows, g.w1.cols), Vector(g.b1.size(), 0.0), Matrix(g.w2.rows, g.w2.cols),
          Vector(g.b2.size(), 0.0)};
}

namespace detail {

struct AdapterActivations {
  Vector pre;     // r w1 + b1
  Vector hidden;  // GELU(pre)
  Vector out;     // hidden w2 + b2
};

inline AdapterActivations adapter_activations(const MlpAdapter& g, std::span<const double> r) {
  require(r.size() == g.d_model(), ErrorCode::DimensionMismatch,
          "representation has " + std::to_string(r.size()) + " dims, adapter expects " +
              std::to_string(g.d_model()));
  AdapterActivations a;
  a.pre = vec_mat(r, g.w1);
  for (std::size_t i = 0; i < a.pre.size(); ++i) a.pre[i] += g.b1[i];
  a.hidden.resize(a.pre.size());
  for (std::size_t i = 0; i < a.pre.size(); ++i) a.hidden[i] = gelu(a.pre[i]);
  a.out = vec_mat(a.hidden, g.w2);
  for (std::size_t i = 0; i < a.out.size(); ++i) a.out[i] += g.b2[i];
  return a;
}

}  // namespace detail

/// g(r) = GELU(r w1 + b1) w2 + b2.
inline Vector adapter_forward(const MlpAdapter& g, std::span<const double> r) {
  return detail::adapter_activations(g, r).out;
}

/// g(r) mapped through the encoder-side transform.
inline Vector query_embedding(const MlpAdapter& g, std::span<const double> r, bool normalize) {
  Vector y = adapter_forward(g, r);
  if (normalize) normalize_in_place(y);
  return y;
}

inline double relevance_score(const MlpAdapter& g, const DocEncoder& encoder, std::span<const double> r,
                              const Document& d) {
  const Vector q = query_embedding(g, r, encoder.normalize);
  const Vector fd = encode_document(encoder, d);
  require(q.size() == fd.size(), ErrorCode::DimensionMismatch, "adapter output does not match encoder width");
  return dot(q, fd);
}

struct InfoNceTerm {
  double probability = 0.0;
  double loss = 0.0;
};

/// Softmax probability of the positive among scores / tau, and -log of it.
inline InfoNceTerm infonce_single(std::span<const double> scores, std::size_t positive, double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::InvalidTemperature, "temperature must be > 0");
  require(positive < scores.size(), ErrorCode::InvalidBatch, "positive index outside the pool");
  Vector scaled(scores.size());
  for (std::size_t j = 0; j < scores.size(); ++j) scaled[j] = scores[j] / tau;
  const double log_p = scaled[positive] - log_sum_exp(scaled);
  return {std::exp(log_p), -log_p};
}

/// Reps, the document pool D and each rep's positive indices into D.
struct TrainBatch {
  std::vector<Vector> reps;
  std::vector<std::vector<std::size_t>> positives;
  Matrix doc_embeddings;  // m x d_emb
  bool normalize_queries = true;

  void validate() const {
    require(!reps.empty() && reps.size() == positives.size(), ErrorCode::InvalidBatch,
            "batch needs one positive set per representation");
    for (const auto& p : positives) {
      require(!p.empty(), ErrorCode::InvalidBatch, "every representation needs >= 1 positive");
      for (std::size_t idx : p)
        require(idx < doc_embeddings.rows, ErrorCode::InvalidBatch, "positive index outside the pool");
    }
  }
};

/// Standard: mean over (rep, positive) pairs of -log softmax probability.
/// Literal: -log of the summed pair probabilities, as the batch loss is
/// sometimes written; kept for comparison.
enum class LossForm { Standard, Literal };

struct LossAndGradients {
  double loss = 0.0;
  AdapterGradients grads;
};

namespace detail {

// -log softmax(scaled)[p]. When p holds the top score the loss is tiny and
// lse - scaled[p] cancels, so it is summed from the other terms instead.
inline double neg_log_softmax(std::span<const double> scaled, std::size_t p, double lse) {
  const double top = scaled[p];
  double rest = 0.0;
  for (std::size_t j = 0; j < scaled.size(); ++j) {
    if (j == p) continue;
    if (scaled[j] > top) return lse - top;
    rest += std::exp(scaled[j] - top);
  }
  return std::log1p(rest);
}

template <bool kWithGrads>
LossAndGradients infonce_impl(const MlpAdapter& g, const TrainBatch& batch, double tau, LossForm form) {
  if (!(tau > 0.0)) fail(ErrorCode::InvalidTemperature, "temperature must be > 0");
  batch.validate();
  require(batch.doc_embeddings.cols == g.d_emb(), ErrorCode::DimensionMismatch,
          "document embeddings do not match the adapter output width");
  const std::size_t n = batch.reps.size();
  const std::size_t m = batch.doc_embeddings.rows;

  std::size_t pairs = 0;
  for (const auto& p : batch.positives) pairs += p.size();

  struct RepState {
    AdapterActivations act;
    Vector q;
    double y_norm = 0.0;
    Vector probs;
    Vector log_probs;
    double pos_mass = 0.0;
    double neg_mass = 0.0;
  };
  std::vector<RepState> states(n);
  double sum_prob = 0.0;   // literal form
  double sum_nlog = 0.0;   // standard form
  Vector scaled(m);
  for (std::size_t i = 0; i < n; ++i) {
    RepState& st = states[i];
    st.act = adapter_activations(g, batch.reps[i]);
    st.q = st.act.out;
    st.y_norm = norm2(st.q);
    if (batch.normalize_queries && st.y_norm > 0.0)
      for (double& v : st.q) v /= st.y_norm;
    for (std::size_t j = 0; j < m; ++j) scaled[j] = dot(batch.doc_embeddings.row(j), st.q) / tau;
    const double lse = log_sum_exp(scaled);
    st.log_probs.resize(m);
    st.probs.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      st.log_probs[j] = scaled[j] - lse;
      st.probs[j] = std::exp(st.log_probs[j]);
    }
    for (std::size_t p : batch.positives[i]) {
      sum_nlog += neg_log_softmax(scaled, p, lse);
      sum_prob += st.probs[p];
      st.pos_mass += st.probs[p];
    }
    st.neg_mass = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (std::find(batch.positives[i].begin(), batch.positives[i].end(), j) == batch.positives[i].end())
        st.neg_mass += st.probs[j];
  }

  LossAndGradients out;
  if (form == LossForm::Standard) {
    out.loss = sum_nlog / static_cast<double>(pairs);
  } else {
    // Near sum_prob = 1, take sum_prob - 1 with the largest positive mass
    // replaced by its complement so a saturated batch keeps its digits.
    std::size_t top = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (states[i].pos_mass > states[top].pos_mass) top = i;
    double excess = -states[top].neg_mass;
    for (std::size_t i = 0; i < n; ++i)
      if (i != top) excess += states[i].pos_mass;
    out.loss = std::abs(excess) < 0.5 ? -std::log1p(excess) : -std::log(sum_prob);
  }
  if constexpr (!kWithGrads) return out;

  out.grads = zero_like(g);
  AdapterGradients& gr = out.grads;
  Vector dscore(m), dq(g.d_emb()), dy(g.d_emb()), dhidden(g.d_hidden());
  for (std::size_t i = 0; i < n; ++i) {
    const RepState& st = states[i];
    const auto& pos = batch.positives[i];
    // dL/ds_ij
    if (form == LossForm::Standard) {
      const double w = 1.0 / (static_cast<double>(pairs) * tau);
      for (std::size_t j = 0; j < m; ++j) dscore[j] = w * static_cast<double>(pos.size()) * st.probs[j];
      for (std::size_t p : pos) dscore[p] -= w;
    } else {
      double pos_mass = 0.0;
      for (std::size_t p : pos) pos_mass += st.probs[p];
      const double w = 1.0 / (sum_prob * tau);
      for (std::size_t j = 0; j < m; ++j) dscore[j] = w * pos_mass * st.probs[j];
      for (std::size_t p : pos) dscore[p] -= w * st.probs[p];
    }
    std::fill(dq.begin(), dq.end(), 0.0);
    for (std::size_t j = 0; j < m; ++j) axpy(dscore[j], batch.doc_embeddings.row(j), dq);

    if (batch.normalize_queries) {
      if (st.y_norm > 0.0) {
        const double qdq = dot(st.q, dq);
        for (std::size_t e = 0; e < dy.size(); ++e) dy[e] = (dq[e] - st.q[e] * qdq) / st.y_norm;
      } else {
        std::fill(dy.begin(), dy.end(), 0.0);
      }
    } else {
      dy = dq;
    }

    axpy(1.0, dy, gr.b2);
    for (std::size_t k = 0; k < g.d_hidden(); ++k) {
      const double hk = st.act.hidden[k];
      double* row = gr.w2.data.data() + k * gr.w2.cols;
      const double* wrow = g.w2.data.data() + k * g.w2.cols;
      double acc = 0.0;
      for (std::size_t e = 0; e < dy.size(); ++e) {
        row[e] += hk * dy[e];
        acc += wrow[e] * dy[e];
      }
      dhidden[k] = acc * gelu_derivative(st.act.pre[k]);
    }
    axpy(1.0, dhidden, gr.b1);
    const auto& r = batch.reps[i];
    for (std::size_t a = 0; a < g.d_model(); ++a) {
      if (r[a] == 0.0) continue;
      axpy(r[a], dhidden, gr.w1.row(a));
    }
  }
  return out;
}

}  // namespace detail

inline double infonce_batch(const MlpAdapter& g, const TrainBatch& batch, double tau,
                            LossForm form = LossForm::Standard) {
  return detail::infonce_impl<false>(g, batch, tau, form).loss;
}

/// Exact gradients of infonce_batch with respect to every adapter parameter.
inline LossAndGradients loss_gradients(const MlpAdapter& g, const TrainBatch& batch, double tau,
                                       LossForm form = LossForm::Standard) {
  return detail::infonce_impl<true>(g, batch, tau, form);
}

struct TrainConfig {
  double temperature = 0.05;
  double learning_rate = 0.05;
  std::size_t steps = 500;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  bool in_batch_negatives = true;
  LossForm loss_form = LossForm::Standard;
  std::size_t eval_every = 0;  // 0: no recall checkpoints

  void validate() const {
    if (!(temperature > 0.0)) fail(ErrorCode::InvalidTemperature, "temperature must be > 0");
    require(learning_rate >= 0.0 && std::isfinite(learning_rate), ErrorCode::InvalidConfig,
            "learning rate must be finite and >= 0");
    require(batch_size >= 1, ErrorCode::InvalidConfig, "batch size must be >= 1");
  }
};

struct RecallCheckpoint {
  std::size_t step = 0;
  double recall_at_1 = 0.0;
};

struct TrainReport {
  std::vector<double> loss_history;
  MlpAdapter adapter;
  std::vector<RecallCheckpoint> checkpoints;
};

/// Mean over reps of |top-k ∩ positives| / |positives|, ranking every row of
/// `doc_embeddings` by the Eq.-4 score.
inline double adapter_recall_at_k(const MlpAdapter& g, const std::vector<Vector>& reps,
                                  const std::vector<std::vector<std::size_t>>& positives,
                                  const Matrix& doc_embeddings, std::size_t k, bool normalize) {
  require(!reps.empty(), ErrorCode::NoTrainingData, "no representations to evaluate");
  double total = 0.0;
  std::vector<std::size_t> order(doc_embeddings.rows);
  Vector scores(doc_embeddings.rows);
  for (std::size_t i = 0; i < reps.size(); ++i) {
    const Vector q = query_embedding(g, reps[i], normalize);
    for (std::size_t j = 0; j < doc_embeddings.rows; ++j) scores[j] = dot(doc_embeddings.row(j), q);
    std::iota(order.begin(), order.end(), 0);
    const std::size_t kk = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), order.end(),
                      [&](std::size_t a, std::size_t b) { return scores[a] != scores[b] ? scores[a] > scores[b] : a < b; });
    std::size_t hit = 0;
    for (std::size_t p : positives[i])
      if (std::find(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk), p) !=
          order.begin() + static_cast<std::ptrdiff_t>(kk))
        ++hit;
    total += static_cast<double>(hit) / static_cast<double>(positives[i].size());
  }
  return total / static_cast<double>(reps.size());
}

inline void sgd_step(MlpAdapter& g, const AdapterGradients& grad, double lr) {
  axpy(-lr, grad.w1.data, g.w1.data);
  axpy(-lr, grad.b1, g.b1);
  axpy(-lr, grad.w2.data, g.w2.data);
  axpy(-lr, grad.b2, g.b2);
}

/// Mini-batch gradient descent over precomputed document embeddings. Batches
/// walk a fresh seeded permutation of the reps each epoch.
inline TrainReport train_adapter_on_embeddings(const MlpAdapter& init, const std::vector<Vector>& reps,
                                               const std::vector<std::vector<std::size_t>>& positives,
                                               const Matrix& doc_embeddings, const TrainConfig& cfg,
                                               bool normalize_queries = true) {
  cfg.validate();
  if (reps.empty()) fail(ErrorCode::NoTrainingData, "no training representations");
  require(reps.size() == positives.size(), ErrorCode::InvalidBatch, "one positive set per representation");
  for (const auto& p : positives) {
    require(!p.empty(), ErrorCode::NoTrainingData, "a training representation has no positive document");
    for (std::size_t idx : p) require(idx < doc_embeddings.rows, ErrorCode::InvalidBatch, "positive out of range");
  }

  TrainReport report;
  report.adapter = init;
  Rng rng = Rng(cfg.seed).split("training");
  std::vector<std::size_t> perm(reps.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t cursor = perm.size();

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<std::size_t> chosen;
    const std::size_t bs = std::min(cfg.batch_size, reps.size());
    while (chosen.size() < bs) {
      if (cursor == perm.size()) {
        rng.shuffle(perm);
        cursor = 0;
      }
      chosen.push_back(perm[cursor++]);
    }

    TrainBatch batch;
    batch.normalize_queries = normalize_queries;
    if (cfg.in_batch_negatives) {
      std::map<std::size_t, std::size_t> local;  // corpus row -> pool row
      std::vector<std::size_t> pool;
      for (std::size_t i : chosen)
        for (std::size_t p : positives[i])
          if (local.emplace(p, pool.size()).second) pool.push_back(p);
      batch.doc_embeddings = Matrix(pool.size(), doc_embeddings.cols);
      for (std::size_t r = 0; r < pool.size(); ++r) {
        const auto src = doc_embeddings.row(pool[r]);
        std::copy(src.begin(), src.end(), batch.doc_embeddings.row(r).begin());
      }
      for (std::size_t i : chosen) {
        batch.reps.push_back(reps[i]);
        std::vector<std::size_t> mapped;
        for (std::size_t p : positives[i]) mapped.push_back(local.at(p));
        batch.positives.push_back(std::move(mapped));
      }
    } else {
      batch.doc_embeddings = doc_embeddings;
      for (std::size_t i : chosen) {
        batch.reps.push_back(reps[i]);
        batch.positives.push_back(positives[i]);
      }
    }

    LossAndGradients lg = loss_gradients(report.adapter, batch, cfg.temperature, cfg.loss_form);
    report.loss_history.push_back(lg.loss);
    if (cfg.learning_rate > 0.0) sgd_step(report.adapter, lg.grads, cfg.learning_rate);

    if (cfg.eval_every > 0 && ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps))
      report.checkpoints.push_back(
          {step + 1, adapter_recall_at_k(report.adapter, reps, positives, doc_embeddings, 1, normalize_queries)});
  }
  return report;
}

struct TrainingPair {
  Vector rep;
  std::vector<std::string> positive_ids;
};

/// Encodes the corpus with the frozen encoder and trains g on (rep,
/// positive-id) pairs.
inline TrainReport train_adapter(const MlpAdapter& init, const std::vector<TrainingPair>& data,
                                 const std::vector<Document>& corpus, const DocEncoder& encoder,
                                 const TrainConfig& cfg) {
  if (data.empty()) fail(ErrorCode::NoTrainingData, "no training pairs");
  const DenseIndex index = build_dense_index(encoder, corpus);
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < index.doc_ids.size(); ++i) row_of[index.doc_ids[i]] = i;
  std::vector<Vector> reps;
  std::vector<std::vector<std::size_t>> positives;
  for (const auto& pair : data) {
    std::vector<std::size_t> rows;
    for (const auto& id : pair.positive_ids) {
      auto it = row_of.find(id);
      require(it != row_of.end(), ErrorCode::NoTrainingData, "positive document '" + id + "' not in corpus");
      rows.push_back(it->second);
    }
    if (rows.empty()) fail(ErrorCode::NoTrainingData, "a training pair has no positive documents");
    reps.push_back(pair.rep);
    positives.push_back(std::move(rows));
  }
  return train_adapter_on_embeddings(init, reps, positives, index.embeddings, cfg, encoder.normalize);
}

/// {l - n k, ..., l, ..., l + n k} clamped to [0, num_layers], sorted and
/// de-duplicated.
inline std::vector<std::size_t> candidate_layers(std::size_t k, std::size_t n, std::size_t l,
                                                 std::size_t num_layers) {
  require(k >= 1, ErrorCode::InvalidConfig, "candidate step must be >= 1");
  std::vector<std::size_t> out;
  const auto center = static_cast<long long>(l);
  const auto top = static_cast<long long>(num_layers);
  for (long long i = -static_cast<long long>(n); i <= static_cast<long long>(n); ++i) {
    const long long layer = std::clamp(center + i * static_cast<long long>(k), 0LL, top);
    out.push_back(static_cast<std::size_t>(layer));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline TensorStore adapter_to_store(const MlpAdapter& g) {
  TensorStore store;
  store.put("adapter.w1", g.w1);
  store.put("adapter.b1", Matrix(1, g.b1.size(), g.b1));
  store.put("adapter.w2", g.w2);
  store.put("adapter.b2", Matrix(1, g.b2.size(), g.b2));
  return store;
}

inline MlpAdapter adapter_from_store(const TensorStore& store) {
  MlpAdapter g{get_matrix(store, "adapter.w1"), get_matrix(store, "adapter.b1").data,
               get_matrix(store, "adapter.w2"), get_matrix(store, "adapter.b2").data};
  require(g.b1.size() == g.w1.cols && g.w2.rows == g.w1.cols && g.b2.size() == g.w2.cols,
          ErrorCode::ShapeMismatch, "adapter tensors have inconsistent shapes");
  return g;
}

}  // namespace lrag
