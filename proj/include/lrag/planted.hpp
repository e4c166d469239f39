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

// Hand-built toy models with known internals.
//
// Planted-layer model. Residual layout (d_model = 80):
//
//   [0, 32)   bridge code: one-hot per bridge word, zero for other words
//   [32, 64)  slot: empty except at the planted layer
//   [64, 76)  small random identity shared by every word
//   76        query flag, set only on the prompt's closing word
//   77        ballast, large on bridge words only
//   78        bridge marker
//
// Flag and marker sit on sine dims of the positional encoding, whose
// frequencies are low enough that they stay near zero for every position.
// Block p-1 attends from the flagged token onto the bridge tokens and copies
// their codes into the slot. Block p repeats the same attention with the
// opposite sign. The bridge tokens themselves are unchanged in between, so
// the second copy cancels the first and only states[p] carries which bridge
// entity the prompt mentions. Every other block is zero. The ballast keeps
// the RMS of every bridge token nearly equal, so their attention scores and
// normalized codes do not drift between the two copies.

#include <cmath>
#include <string>
#include <vector>

#include "lrag/error.hpp"
#include "lrag/rng.hpp"
#include "lrag/tokenizer.hpp"
#include "lrag/toy_lm.hpp"

namespace lrag {

struct PlantedSpec {
  std::size_t n_layers = 8;
  std::size_t planted_layer = 4;  // 1 .. n_layers
  std::size_t max_seq = 256;
  double flag = 8.0;
  double ballast = 60.0;
  double marker = 40.0;
  double code = 40.0;
  double slot_gain = 5.0;
  double attention_sharpness = 1.0;
  double identity_std = 0.5;
  std::vector<std::string> query_words = {"answer"};
  std::uint64_t seed = 42;
};

inline constexpr std::size_t kPlantedWidth = 80;
inline constexpr std::size_t kPlantedHeads = 4;
inline constexpr std::size_t kCodeDims = 32;
inline constexpr std::size_t kSlotBegin = 32;
inline constexpr std::size_t kIdentityBegin = 64;
inline constexpr std::size_t kFlagDim = 76;
inline constexpr std::size_t kBallastDim = 77;
inline constexpr std::size_t kMarkerDim = 78;

inline void plant_copy(BlockWeights& b, double qk, double gain) {
  const std::size_t dh = kPlantedWidth / kPlantedHeads;
  // Heads 0 and 1 carry code dims [0, 20) and [20, 32).
  for (std::size_t h = 0; h < 2; ++h) {
    b.w_q(kFlagDim, h * dh) = qk;
    b.w_k(kMarkerDim, h * dh) = qk;
  }
  for (std::size_t c = 0; c < kCodeDims; ++c) {
    b.w_v(c, c) = 1.0;
    b.w_o(c, kSlotBegin + c) = gain;
  }
}

inline ToyLM build_planted_model(const Vocabulary& vocab, const std::vector<std::string>& bridge_words,
                                 const PlantedSpec& s) {
  require(s.planted_layer >= 1 && s.planted_layer <= s.n_layers, ErrorCode::InvalidConfig,
          "planted layer must lie in [1, n_layers]");
  require(bridge_words.size() <= kCodeDims, ErrorCode::InvalidConfig,
          "at most " + std::to_string(kCodeDims) + " bridge words");
  const std::size_t d = kPlantedWidth;
  ToyLM lm;
  lm.config = ToyLMConfig::make(vocab.size(), d, s.n_layers, kPlantedHeads, s.max_seq, s.seed);

  const Rng root = Rng(s.seed).split("planted");
  lm.embedding = Matrix(vocab.size(), d);
  Rng id_rng = root.split("identity");
  for (std::size_t t = 0; t < vocab.size(); ++t)
    for (std::size_t j = kIdentityBegin; j < kFlagDim; ++j) lm.embedding(t, j) = id_rng.normal(s.identity_std);
  for (std::size_t i = 0; i < bridge_words.size(); ++i) {
    require(vocab.contains(bridge_words[i]), ErrorCode::InvalidConfig,
            "bridge word '" + bridge_words[i] + "' not in vocab");
    const TokenId t = vocab.id(bridge_words[i]);
    lm.embedding(t, kBallastDim) = s.ballast;
    lm.embedding(t, kMarkerDim) = s.marker;
    lm.embedding(t, i) = s.code;
  }
  for (const auto& w : s.query_words) {
    require(vocab.contains(w), ErrorCode::InvalidConfig, "query word '" + w + "' not in vocab");
    lm.embedding(vocab.id(w), kFlagDim) = s.flag;
  }

  for (std::size_t l = 0; l < s.n_layers; ++l) lm.blocks.push_back(zero_block(d));
  const double qk = std::sqrt(s.attention_sharpness * std::sqrt(static_cast<double>(d / kPlantedHeads)));
  plant_copy(lm.blocks[s.planted_layer - 1], qk, s.slot_gain);
  if (s.planted_layer < s.n_layers) plant_copy(lm.blocks[s.planted_layer], qk, -s.slot_gain);

  lm.final_norm.assign(d, 1.0);
  lm.unembedding = root.split("unembedding").gaussian_matrix(d, vocab.size(), kInitStd);
  return lm;
}

// ---------------------------------------------------------------------------
// Two-layer logit-lens model: block 1 pushes the residual toward token A's
// unembedding direction, block 2 pushes it away from A and toward B.

struct LensModel {
  ToyLM lm;
  TokenId token_a = 0;
  TokenId token_b = 0;
};

inline LensModel build_lens_model(std::size_t vocab_size = 8, double push = 12.0) {
  require(vocab_size >= 3, ErrorCode::InvalidConfig, "lens model needs at least 3 tokens");
  const std::size_t d = 8;
  LensModel m;
  m.token_a = 1;
  m.token_b = 2;
  m.lm.config = ToyLMConfig::make(vocab_size, d, 2, 2, 32, 0);
  m.lm.embedding = Matrix(vocab_size, d);
  for (std::size_t t = 0; t < vocab_size; ++t) m.lm.embedding(t, d - 1) = 4.0;
  m.lm.unembedding = Matrix(d, vocab_size);
  m.lm.unembedding(0, m.token_a) = 1.0;
  m.lm.unembedding(1, m.token_b) = 1.0;

  // Block 1 reads the constant dim. Block 2 reads the A dim itself, which
  // dominates the normalized state by then, so its push scales with A.
  BlockWeights b1 = zero_block(d), b2 = zero_block(d);
  b1.mlp_in(d - 1, 0) = 1.0;
  b1.mlp_out(0, 0) = push;
  b2.mlp_in(0, 0) = 1.0;
  b2.mlp_out(0, 0) = -2.0 * push;
  b2.mlp_out(0, 1) = 2.0 * push;
  m.lm.blocks = {b1, b2};
  m.lm.final_norm.assign(d, 1.0);
  return m;
}

}  // namespace lrag
