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
#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "lrag/logit_lens.hpp"
#include "lrag/planted.hpp"
#include "lrag/rng.hpp"

using namespace lrag;

namespace {

ToyLM identity_unembedding_model(std::size_t d) {
  ToyLM lm = init_toy_lm(ToyLMConfig::make(d, d, 0, 1, 8, 0));
  lm.unembedding = Matrix::identity(d);
  return lm;
}

std::size_t peak(const std::vector<double>& seq) {
  return static_cast<std::size_t>(std::max_element(seq.begin(), seq.end()) - seq.begin());
}

}  // namespace

TEST(LensDistribution, ClosedForms) {
  const ToyLM lm = identity_unembedding_model(2);
  const Vector p = lens_distribution(lm, std::vector<double>{std::log(2.0), 0.0});
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
  const ToyLM wide = identity_unembedding_model(5);
  for (double v : lens_distribution(wide, std::vector<double>(5, 0.0))) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(LensDistribution, RejectsWrongWidth) {
  const ToyLM lm = identity_unembedding_model(2);
  try {
    lens_distribution(lm, std::vector<double>{1, 2, 3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(LensDistribution, FinalLayerMatchesModelOutput) {
  Rng rng(77);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ToyLM lm = init_toy_lm(ToyLMConfig::make(30, 12, 1 + seed % 4, 3, 20, seed));
    std::vector<TokenId> toks(1 + rng.below(19));
    for (auto& t : toks) t = static_cast<TokenId>(rng.below(30));
    const auto tr = forward(lm, toks);
    const Vector lens = lens_distribution(lm, tr.states.back(), true);
    const Vector out = softmax(tr.final_logits);
    for (std::size_t t = 0; t < out.size(); ++t) EXPECT_NEAR(lens[t], out[t], 1e-12);
  }
}

TEST(TokenTrajectory, TrackedAreSlicesOfDistributions) {
  const ToyLM lm = init_toy_lm(ToyLMConfig::make(30, 12, 3, 3, 20, 4));
  const std::vector<TokenId> toks = {1, 2, 3, 4};
  for (bool norm : {false, true}) {
    const auto tr = token_trajectory(lm, toks, {5, 0, 29}, norm);
    ASSERT_EQ(tr.distributions.size(), 4u);
    ASSERT_EQ(tr.argmax_per_layer.size(), 4u);
    for (std::size_t l = 0; l < 4; ++l) {
      double s = 0.0;
      for (double v : tr.distributions[l]) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
      for (const auto& [t, seq] : tr.tracked) EXPECT_EQ(seq[l], tr.distributions[l][t]);
      EXPECT_EQ(tr.argmax_per_layer[l], argmax_token(tr.distributions[l]));
    }
  }
  EXPECT_THROW(token_trajectory(lm, toks, {30}), Error);
}

TEST(TokenTrajectory, ZeroLayerAndEmptyTracking) {
  const ToyLM lm = init_toy_lm(ToyLMConfig::make(20, 8, 0, 2, 10, 3));
  const std::vector<TokenId> toks = {3, 1};
  const auto tr = token_trajectory(lm, toks, {}, true);
  ASSERT_EQ(tr.distributions.size(), 1u);
  EXPECT_TRUE(tr.tracked.empty());
  const Vector out = softmax(forward(lm, toks).final_logits);
  for (std::size_t t = 0; t < out.size(); ++t) EXPECT_NEAR(tr.distributions[0][t], out[t], 1e-12);
  EXPECT_EQ(trajectory_csv(tr), "layer,token_id,probability\n");
}

TEST(TokenTrajectory, IntermediateAnswerPeaksBeforeFinal) {
  const LensModel m = build_lens_model();
  const std::vector<TokenId> toks = {3, 4, 5};
  for (bool norm : {false, true}) {
    const auto tr = token_trajectory(m.lm, toks, {m.token_a, m.token_b}, norm);
    const auto& pa = tr.tracked.at(m.token_a);
    const auto& pb = tr.tracked.at(m.token_b);
    EXPECT_EQ(peak(pa), 1u) << "final norm " << norm;
    EXPECT_EQ(peak(pb), 2u) << "final norm " << norm;
    EXPECT_EQ(tr.argmax_per_layer[1], m.token_a);
    EXPECT_EQ(tr.argmax_per_layer[2], m.token_b);
  }
}

TEST(TokenTrajectory, Serialization) {
  const LensModel m = build_lens_model();
  const auto tr = token_trajectory(m.lm, std::vector<TokenId>{3}, {m.token_a});
  const std::string csv = trajectory_csv(tr);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("\n1,1,0.9999"), std::string::npos);
  const auto j = trajectory_json(tr);
  EXPECT_EQ(j["layers"], 3);
  EXPECT_EQ(j["tracked"][0]["token_id"], m.token_a);
  EXPECT_EQ(j["tracked"][0]["probabilities"].size(), 3u);
}
