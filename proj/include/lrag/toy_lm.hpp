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

// A small pre-norm decoder-only transformer: token embedding plus sinusoidal
// positions, then per block
//
//   x += Attn(rmsnorm(x; norm1)) W_o
//   x += GELU(rmsnorm(x; norm2) W_in) W_out
//
// and a final rmsnorm before the unembedding. Weights are stored in
// [in, out] orientation, so a row vector x maps to x W.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrag/error.hpp"
#include "lrag/linalg.hpp"
#include "lrag/matrix.hpp"
#include "lrag/rng.hpp"
#include "lrag/tensor_store.hpp"
#include "lrag/tokenizer.hpp"

namespace lrag {

inline constexpr double kRmsNormEps = 1e-5;
inline constexpr double kInitStd = 0.02;
inline constexpr std::size_t kLastPosition = std::numeric_limits<std::size_t>::max();

struct ToyLMConfig {
  std::size_t vocab_size = 512;
  std::size_t d_model = 64;
  std::size_t n_layers = 8;
  std::size_t n_heads = 4;
  std::size_t d_head = 16;
  std::size_t max_seq = 256;
  std::uint64_t seed = 42;

  void validate() const {
    require(vocab_size >= 2, ErrorCode::InvalidConfig, "vocab_size must be >= 2");
    require(d_model >= 1 && n_heads >= 1 && d_head >= 1 && max_seq >= 1, ErrorCode::InvalidConfig,
            "d_model, n_heads, d_head and max_seq must be >= 1");
    require(d_model == n_heads * d_head, ErrorCode::InvalidConfig,
            "d_model " + std::to_string(d_model) + " != n_heads " + std::to_string(n_heads) + " * d_head " +
                std::to_string(d_head));
  }

  /// Config with d_head derived from d_model / n_heads; rejects remainders.
  static ToyLMConfig make(std::size_t vocab, std::size_t d_model, std::size_t n_layers, std::size_t n_heads,
                          std::size_t max_seq, std::uint64_t seed) {
    require(n_heads >= 1 && d_model % n_heads == 0, ErrorCode::InvalidConfig,
            "d_model " + std::to_string(d_model) + " is not divisible by n_heads " + std::to_string(n_heads));
    ToyLMConfig c{vocab, d_model, n_layers, n_heads, d_model / n_heads, max_seq, seed};
    c.validate();
    return c;
  }

  nlohmann::json to_json() const {
    return {{"vocab_size", vocab_size}, {"d_model", d_model}, {"n_layers", n_layers}, {"n_heads", n_heads},
            {"d_head", d_head},         {"max_seq", max_seq}, {"seed", seed}};
  }

  static ToyLMConfig from_json(const nlohmann::json& j) {
    ToyLMConfig c;
    try {
      c.vocab_size = j.at("vocab_size").get<std::size_t>();
      c.d_model = j.at("d_model").get<std::size_t>();
      c.n_layers = j.at("n_layers").get<std::size_t>();
      c.n_heads = j.at("n_heads").get<std::size_t>();
      c.d_head = j.at("d_head").get<std::size_t>();
      c.max_seq = j.at("max_seq").get<std::size_t>();
      c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidConfig, std::string("bad model config: ") + e.what());
    }
    c.validate();
    return c;
  }

  bool operator==(const ToyLMConfig&) const = default;
};

struct BlockWeights {
  Matrix w_q, w_k, w_v, w_o;  // d_model x d_model
  Matrix mlp_in;              // d_model x 4 d_model
  Matrix mlp_out;             // 4 d_model x d_model
  Vector norm1, norm2;        // RMSNorm gains

  bool operator==(const BlockWeights&) const = default;
};

struct ToyLM {
  ToyLMConfig config;
  Matrix embedding;  // vocab x d_model
  std::vector<BlockWeights> blocks;
  Vector final_norm;
  Matrix unembedding;  // d_model x vocab

  bool operator==(const ToyLM&) const = default;
};

/// Hidden states at one token position: states[0] is the input embedding,
/// states[l] the residual stream after block l.
struct HiddenStateTrace {
  std::vector<Vector> states;
  Vector final_logits;
  std::size_t position = 0;
};

inline BlockWeights zero_block(std::size_t d_model) {
  return {Matrix(d_model, d_model),     Matrix(d_model, d_model),     Matrix(d_model, d_model),
          Matrix(d_model, d_model),     Matrix(d_model, 4 * d_model), Matrix(4 * d_model, d_model),
          Vector(d_model, 1.0),         Vector(d_model, 1.0)};
}

inline ToyLM init_toy_lm(const ToyLMConfig& config) {
  config.validate();
  const Rng root = Rng(config.seed).split("model");
  const std::size_t d = config.d_model;
  ToyLM lm;
  lm.config = config;
  lm.embedding = root.split("embedding").gaussian_matrix(config.vocab_size, d, kInitStd);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const Rng lr = root.split("layer").split(l);
    BlockWeights b;
    b.w_q = lr.split("w_q").gaussian_matrix(d, d, kInitStd);
    b.w_k = lr.split("w_k").gaussian_matrix(d, d, kInitStd);
    b.w_v = lr.split("w_v").gaussian_matrix(d, d, kInitStd);
    b.w_o = lr.split("w_o").gaussian_matrix(d, d, kInitStd);
    b.mlp_in = lr.split("mlp_in").gaussian_matrix(d, 4 * d, kInitStd);
    b.mlp_out = lr.split("mlp_out").gaussian_matrix(4 * d, d, kInitStd);
    b.norm1.assign(d, 1.0);
    b.norm2.assign(d, 1.0);
    lm.blocks.push_back(std::move(b));
  }
  lm.final_norm.assign(d, 1.0);
  lm.unembedding = root.split("unembedding").gaussian_matrix(d, config.vocab_size, kInitStd);
  return lm;
}

inline Vector rms_norm(std::span<const double> x, std::span<const double> gain) {
  double ms = 0.0;
  for (double v : x) ms += v * v;
  ms /= static_cast<double>(x.size());
  const double inv = 1.0 / std::sqrt(ms + kRmsNormEps);
  Vector y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * inv * gain[i];
  return y;
}

inline Matrix rms_norm_rows(const Matrix& x, std::span<const double> gain) {
  Matrix y(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const Vector n = rms_norm(x.row(r), gain);
    std::copy(n.begin(), n.end(), y.row(r).begin());
  }
  return y;
}

/// Sinusoidal position code of width d: sin on even, cos on odd coordinates.
inline Vector positional_encoding(std::size_t pos, std::size_t d) {
  Vector pe(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d);
    const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
    pe[i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }
  return pe;
}

/// Causal softmax weights per head: weights[h] is T x T, zero above the diagonal.
inline std::vector<Matrix> attention_weights(const Matrix& w_q, const Matrix& w_k, const Matrix& x,
                                             std::size_t n_heads) {
  require(w_q.rows == x.cols && w_k.rows == x.cols && w_q.cols == w_k.cols && w_q.cols % n_heads == 0,
          ErrorCode::ShapeMismatch, "attention projections do not match the input width");
  const Matrix q = matmul(x, w_q);
  const Matrix k = matmul(x, w_k);
  const std::size_t t = x.rows;
  const std::size_t dh = w_q.cols / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Matrix> weights(n_heads, Matrix(t, t));
  Vector scores;
  for (std::size_t h = 0; h < n_heads; ++h) {
    for (std::size_t i = 0; i < t; ++i) {
      scores.assign(i + 1, 0.0);
      const double* qi = q.data.data() + i * q.cols + h * dh;
      for (std::size_t j = 0; j <= i; ++j) {
        const double* kj = k.data.data() + j * k.cols + h * dh;
        double s = 0.0;
        for (std::size_t e = 0; e < dh; ++e) s += qi[e] * kj[e];
        scores[j] = s * scale;
      }
      const Vector p = softmax(scores);
      for (std::size_t j = 0; j <= i; ++j) weights[h](i, j) = p[j];
    }
  }
  return weights;
}

/// Multi-head causal scaled dot-product attention over the rows of x; head
/// outputs are concatenated (the output projection is applied by the block).
inline Matrix attention(const Matrix& w_q, const Matrix& w_k, const Matrix& w_v, const Matrix& x,
                        std::size_t n_heads) {
  require(w_v.rows == x.cols && w_v.cols == w_q.cols, ErrorCode::ShapeMismatch,
          "value projection does not match the input width");
  const auto weights = attention_weights(w_q, w_k, x, n_heads);
  const Matrix v = matmul(x, w_v);
  const std::size_t dh = v.cols / n_heads;
  Matrix out(x.rows, v.cols);
  for (std::size_t h = 0; h < n_heads; ++h)
    for (std::size_t i = 0; i < x.rows; ++i) {
      double* oi = out.data.data() + i * out.cols + h * dh;
      for (std::size_t j = 0; j <= i; ++j) {
        const double a = weights[h](i, j);
        const double* vj = v.data.data() + j * v.cols + h * dh;
        for (std::size_t e = 0; e < dh; ++e) oi[e] += a * vj[e];
      }
    }
  return out;
}

inline void check_tokens(const ToyLM& lm, std::span<const TokenId> tokens) {
  require(!tokens.empty(), ErrorCode::TokenOutOfRange, "empty token sequence");
  require(tokens.size() <= lm.config.max_seq, ErrorCode::SequenceTooLong,
          std::to_string(tokens.size()) + " tokens exceed max_seq " + std::to_string(lm.config.max_seq));
  for (TokenId t : tokens)
    require(t < lm.config.vocab_size, ErrorCode::TokenOutOfRange,
            "token id " + std::to_string(t) + " >= vocab_size " + std::to_string(lm.config.vocab_size));
}

/// Runs the model and records the residual stream at `capture_position`
/// (default: the last token). Tokens after the capture position cannot
/// influence it and are not processed.
inline HiddenStateTrace forward(const ToyLM& lm, std::span<const TokenId> tokens,
                                std::size_t capture_position = kLastPosition) {
  check_tokens(lm, tokens);
  const std::size_t pos = capture_position == kLastPosition ? tokens.size() - 1 : capture_position;
  require(pos < tokens.size(), ErrorCode::TokenOutOfRange, "capture position " + std::to_string(pos) +
                                                               " outside a sequence of " +
                                                               std::to_string(tokens.size()));
  const std::size_t d = lm.config.d_model;
  const std::size_t t = pos + 1;

  Matrix x(t, d);
  for (std::size_t i = 0; i < t; ++i) {
    const auto emb = lm.embedding.row(tokens[i]);
    const Vector pe = positional_encoding(i, d);
    for (std::size_t j = 0; j < d; ++j) x(i, j) = emb[j] + pe[j];
  }

  HiddenStateTrace trace;
  trace.position = pos;
  auto capture = [&] {
    const auto r = x.row(pos);
    trace.states.emplace_back(r.begin(), r.end());
  };
  capture();

  for (const BlockWeights& b : lm.blocks) {
    const Matrix attn = matmul(attention(b.w_q, b.w_k, b.w_v, rms_norm_rows(x, b.norm1), lm.config.n_heads), b.w_o);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += attn.data[i];
    Matrix hidden = matmul(rms_norm_rows(x, b.norm2), b.mlp_in);
    for (double& v : hidden.data) v = gelu(v);
    const Matrix mlp = matmul(hidden, b.mlp_out);
    for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += mlp.data[i];
    capture();
  }

  trace.final_logits = vec_mat(rms_norm(x.row(pos), lm.final_norm), lm.unembedding);
  return trace;
}

/// Raw residual-stream state after `layer` blocks at the last token.
inline Vector extract_representation(const ToyLM& lm, std::span<const TokenId> tokens, std::size_t layer) {
  require(layer <= lm.config.n_layers, ErrorCode::LayerOutOfRange,
          "layer " + std::to_string(layer) + " > n_layers " + std::to_string(lm.config.n_layers));
  return forward(lm, tokens).states[layer];
}

inline TokenId argmax_token(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

/// Per-block key and value rows of the positions decoded so far. Feeding a
/// sequence token by token reproduces forward()'s last-position logits with
/// the same floating-point operation order.
struct DecodeCache {
  std::vector<std::vector<Vector>> keys, values;
  std::size_t length = 0;
};

inline Vector decode_step(const ToyLM& lm, DecodeCache& cache, TokenId token) {
  require(token < lm.config.vocab_size, ErrorCode::TokenOutOfRange, "token id " + std::to_string(token));
  require(cache.length < lm.config.max_seq, ErrorCode::SequenceTooLong, "decode cache is full");
  const std::size_t d = lm.config.d_model;
  const std::size_t heads = lm.config.n_heads;
  if (cache.keys.empty()) {
    cache.keys.resize(lm.blocks.size());
    cache.values.resize(lm.blocks.size());
  }
  const std::size_t pos = cache.length++;
  Vector x(d);
  const auto emb = lm.embedding.row(token);
  const Vector pe = positional_encoding(pos, d);
  for (std::size_t j = 0; j < d; ++j) x[j] = emb[j] + pe[j];

  for (std::size_t l = 0; l < lm.blocks.size(); ++l) {
    const BlockWeights& b = lm.blocks[l];
    const Vector xn = rms_norm(x, b.norm1);
    const Vector q = vec_mat(xn, b.w_q);
    cache.keys[l].push_back(vec_mat(xn, b.w_k));
    cache.values[l].push_back(vec_mat(xn, b.w_v));
    const auto& ks = cache.keys[l];
    const auto& vs = cache.values[l];
    const std::size_t dh = q.size() / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Vector out(vs[0].size(), 0.0), scores(pos + 1);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t j = 0; j <= pos; ++j) {
        double sc = 0.0;
        for (std::size_t e = 0; e < dh; ++e) sc += q[h * dh + e] * ks[j][h * dh + e];
        scores[j] = sc * scale;
      }
      const Vector p = softmax(scores);
      for (std::size_t j = 0; j <= pos; ++j)
        for (std::size_t e = 0; e < dh; ++e) out[h * dh + e] += p[j] * vs[j][h * dh + e];
    }
    const Vector attn = vec_mat(out, b.w_o);
    for (std::size_t j = 0; j < d; ++j) x[j] += attn[j];
    Vector hidden = vec_mat(rms_norm(x, b.norm2), b.mlp_in);
    for (double& v : hidden) v = gelu(v);
    const Vector mlp = vec_mat(hidden, b.mlp_out);
    for (std::size_t j = 0; j < d; ++j) x[j] += mlp[j];
  }
  return vec_mat(rms_norm(x, lm.final_norm), lm.unembedding);
}

/// Greedy continuation of up to `max_new_tokens`, stopping at max_seq.
inline std::vector<TokenId> generate_greedy(const ToyLM& lm, std::vector<TokenId> tokens, std::size_t max_new_tokens) {
  check_tokens(lm, tokens);
  std::vector<TokenId> produced;
  if (max_new_tokens == 0 || tokens.size() >= lm.config.max_seq) return produced;
  DecodeCache cache;
  Vector logits;
  for (TokenId t : tokens) logits = decode_step(lm, cache, t);
  while (true) {
    const TokenId next = argmax_token(logits);
    produced.push_back(next);
    if (produced.size() == max_new_tokens || cache.length + 1 >= lm.config.max_seq) break;
    logits = decode_step(lm, cache, next);
  }
  return produced;
}

inline Matrix row_matrix(std::span<const double> v) { return Matrix(1, v.size(), Vector(v.begin(), v.end())); }

inline TensorStore to_tensor_store(const ToyLM& lm, const std::optional<Vocabulary>& vocab = std::nullopt) {
  TensorStore store;
  store.put("embedding", lm.embedding);
  for (std::size_t l = 0; l < lm.blocks.size(); ++l) {
    const auto& b = lm.blocks[l];
    const std::string p = "layer." + std::to_string(l) + ".";
    store.put(p + "w_q", b.w_q);
    store.put(p + "w_k", b.w_k);
    store.put(p + "w_v", b.w_v);
    store.put(p + "w_o", b.w_o);
    store.put(p + "mlp_in", b.mlp_in);
    store.put(p + "mlp_out", b.mlp_out);
    store.put(p + "norm1", row_matrix(b.norm1));
    store.put(p + "norm2", row_matrix(b.norm2));
  }
  store.put("final_norm", row_matrix(lm.final_norm));
  store.put("unembedding", lm.unembedding);
  store.metadata["config"] = lm.config.to_json().dump();
  if (vocab) store.metadata["vocab"] = vocab->to_json().dump();
  return store;
}

inline ToyLM toy_lm_from_store(const TensorStore& store) {
  auto it = store.metadata.find("config");
  require(it != store.metadata.end(), ErrorCode::InvalidConfig, "model file has no config metadata");
  nlohmann::json cfg_j;
  try {
    cfg_j = nlohmann::json::parse(it->second);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("config metadata is not JSON: ") + e.what());
  }
  ToyLM lm;
  lm.config = ToyLMConfig::from_json(cfg_j);
  const auto& c = lm.config;
  const std::size_t d = c.d_model;

  auto fetch = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    const Matrix& m = get_matrix(store, name);
    require(m.rows == rows && m.cols == cols, ErrorCode::InvalidConfig,
            name + " is " + std::to_string(m.rows) + "x" + std::to_string(m.cols) + ", expected " +
                std::to_string(rows) + "x" + std::to_string(cols));
    return m;
  };
  auto fetch_vec = [&](const std::string& name) { return fetch(name, 1, d).data; };

  lm.embedding = fetch("embedding", c.vocab_size, d);
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const std::string p = "layer." + std::to_string(l) + ".";
    BlockWeights b{fetch(p + "w_q", d, d),          fetch(p + "w_k", d, d),
                   fetch(p + "w_v", d, d),          fetch(p + "w_o", d, d),
                   fetch(p + "mlp_in", d, 4 * d),   fetch(p + "mlp_out", 4 * d, d),
                   fetch_vec(p + "norm1"),          fetch_vec(p + "norm2")};
    lm.blocks.push_back(std::move(b));
  }
  lm.final_norm = fetch_vec("final_norm");
  lm.unembedding = fetch("unembedding", d, c.vocab_size);
  return lm;
}

inline std::optional<Vocabulary> vocabulary_from_store(const TensorStore& store) {
  auto it = store.metadata.find("vocab");
  if (it == store.metadata.end()) return std::nullopt;
  return Vocabulary::from_json(nlohmann::json::parse(it->second));
}

inline nlohmann::json trace_to_json(const ToyLMConfig& config, std::span<const TokenId> tokens,
                                    const HiddenStateTrace& trace) {
  return {{"config", config.to_json()},
          {"tokens", std::vector<TokenId>(tokens.begin(), tokens.end())},
          {"position", trace.position},
          {"states", trace.states},
          {"final_logits", trace.final_logits}};
}

}  // namespace lrag
