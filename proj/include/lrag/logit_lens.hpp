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

#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lrag/format.hpp"
#include "lrag/linalg.hpp"
#include "lrag/toy_lm.hpp"

namespace lrag {

struct LogitLensTrace {
  std::vector<Vector> distributions;  // one per captured layer
  std::map<TokenId, std::vector<double>> tracked;
  std::vector<TokenId> argmax_per_layer;
};

/// softmax(W_U h), with the model's final norm applied to h first when asked.
inline Vector lens_distribution(const ToyLM& lm, std::span<const double> h, bool apply_final_norm = false) {
  require(h.size() == lm.config.d_model, ErrorCode::DimensionMismatch,
          "hidden state has " + std::to_string(h.size()) + " entries, model width is " +
              std::to_string(lm.config.d_model));
  for (double v : h) require(std::isfinite(v), ErrorCode::InvalidValue, "hidden state is not finite");
  if (apply_final_norm) return softmax(vec_mat(rms_norm(h, lm.final_norm), lm.unembedding));
  return softmax(vec_mat(h, lm.unembedding));
}

inline LogitLensTrace token_trajectory(const ToyLM& lm, std::span<const TokenId> tokens,
                                       const std::vector<TokenId>& tracked_ids, bool apply_final_norm = false) {
  for (TokenId t : tracked_ids)
    require(t < lm.config.vocab_size, ErrorCode::TokenOutOfRange, "tracked id " + std::to_string(t));
  const HiddenStateTrace trace = forward(lm, tokens);
  LogitLensTrace out;
  for (TokenId t : tracked_ids) out.tracked[t];
  for (const auto& h : trace.states) {
    Vector p = lens_distribution(lm, h, apply_final_norm);
    out.argmax_per_layer.push_back(argmax_token(p));
    for (auto& [t, seq] : out.tracked) seq.push_back(p[t]);
    out.distributions.push_back(std::move(p));
  }
  return out;
}

inline std::string trajectory_csv(const LogitLensTrace& trace) {
  std::string out = "layer,token_id,probability\n";
  for (std::size_t l = 0; l < trace.distributions.size(); ++l)
    for (const auto& [t, seq] : trace.tracked)
      out += std::to_string(l) + "," + std::to_string(t) + "," + format_double(seq[l]) + "\n";
  return out;
}

inline nlohmann::json trajectory_json(const LogitLensTrace& trace, const Vocabulary* vocab = nullptr) {
  nlohmann::json tracked = nlohmann::json::array();
  for (const auto& [t, seq] : trace.tracked) {
    nlohmann::json e = {{"token_id", t}, {"probabilities", seq}};
    if (vocab && t < vocab->size()) e["token"] = vocab->word(t);
    tracked.push_back(std::move(e));
  }
  nlohmann::json argmax = trace.argmax_per_layer;
  nlohmann::json j = {{"layers", trace.distributions.size()}, {"argmax_per_layer", argmax}, {"tracked", tracked}};
  if (vocab) {
    nlohmann::json words = nlohmann::json::array();
    for (TokenId t : trace.argmax_per_layer) words.push_back(t < vocab->size() ? vocab->word(t) : "");
    j["argmax_tokens"] = words;
  }
  return j;
}

}  // namespace lrag
