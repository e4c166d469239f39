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

#include <gtest/gtest.h>

#include "lrag/pipeline.hpp"
#include "lrag/planted.hpp"

using namespace lrag;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidValue;
}

RetrievalResult ranked(std::vector<std::string> ids) {
  RetrievalResult r;
  for (const auto& id : ids) r.ranked.push_back({id, 0.0});
  r.k_requested = ids.size();
  return r;
}

struct Tiny {
  Vocabulary vocab{std::vector<std::string>{"lake", "tower", "road", "king", "where", "is", "the"}};
  ToyLM lm = init_toy_lm(ToyLMConfig::make(8, 8, 2, 2, 32, 1));
  DocEncoder enc = make_doc_encoder(vocab, 4, 1);
};

// Zero weights and b2 = f(target): the query embedding is f(target) itself.
MlpAdapter pointing_adapter(const RetrievalSystem& sys, std::size_t d_model, const std::string& target) {
  MlpAdapter g = zero_like(init_adapter(d_model, 2 * d_model, sys.encoder.d_emb, 0));
  g.b2 = encode_document(sys.encoder, sys.doc(target));
  return g;
}

}  // namespace

TEST(RecallAtK, Table) {
  EXPECT_EQ(recall_at_k(ranked({"A", "C"}), {"A", "B"}), 0.5);
  EXPECT_EQ(recall_at_k(ranked({"B", "X", "A"}), {"A", "B"}), 1.0);
  EXPECT_EQ(recall_at_k(ranked({"C", "D"}), {"A", "B"}), 0.0);
  EXPECT_EQ(recall_at_k(ranked({}), {"A"}), 0.0);
  EXPECT_EQ(recall_at_k(ranked({"A", "A"}), {"A", "B"}), 0.5);
  EXPECT_EQ(recall_at_k(ranked({"A"}), {"A", "A"}), 1.0);
  EXPECT_EQ(code_of([] { recall_at_k(ranked({"A"}), {}); }), ErrorCode::EmptyGold);
}

TEST(RecallAtK, MonotoneInK) {
  const std::vector<std::string> order = {"d3", "d1", "d7", "d2", "d9", "d4"};
  const std::vector<std::string> gold = {"d2", "d4", "d7"};
  double prev = 0.0;
  for (std::size_t k = 0; k <= order.size(); ++k) {
    const double r = recall_at_k(ranked(std::vector<std::string>(order.begin(), order.begin() + k)), gold);
    EXPECT_GE(r, prev);
    prev = r;
  }
  EXPECT_EQ(prev, 1.0);
}

TEST(AccuracyContains, Table) {
  EXPECT_TRUE(accuracy_contains("the answer is 13 june 1946", "13 June 1946"));
  EXPECT_TRUE(accuracy_contains("Rune Gerhardsen (born 13 June 1946) is a Norwegian politician", "13 June 1946"));
  EXPECT_FALSE(accuracy_contains("unknown", "Rune Gerhardsen"));
  EXPECT_TRUE(accuracy_contains("Rune  Gerhardsen", "rune gerhardsen"));
  EXPECT_TRUE(accuracy_contains("  rune\tgerhardsen\n", "Rune Gerhardsen"));
  EXPECT_FALSE(accuracy_contains("13 June", "13 June 1946"));
  EXPECT_FALSE(accuracy_contains("13june 1946", "13 June 1946"));
  EXPECT_FALSE(accuracy_contains("anything", "   "));
  EXPECT_TRUE(accuracy_contains("kaze", "KAZE"));
  EXPECT_EQ(normalize_answer_text("  A \t B  "), "a b");
}

TEST(Pipeline, SingleDocumentCorpus) {
  Tiny t;
  const RetrievalSystem sys = make_retrieval_system({{"only", "", "the king is by the lake"}}, t.enc);
  const MlpAdapter g = init_adapter(8, 16, 4, 2);
  PipelineConfig cfg;
  cfg.layer = 1;
  cfg.max_new_tokens = 3;
  const auto r = run_lrag(t.lm, t.vocab, sys, g, cfg, "where is the king");
  EXPECT_EQ(r.first_hop.ids(), std::vector<std::string>{"only"});
  EXPECT_TRUE(r.next_hop.ranked.empty());
  EXPECT_EQ(split_words(r.answer).size(), 3u);

  cfg.mode = PipelineMode::Vanilla;
  EXPECT_EQ(run_baseline(t.lm, t.vocab, sys, cfg, "where is the king").retrieved.ids(),
            std::vector<std::string>{"only"});
}

TEST(Pipeline, ModeChecks) {
  Tiny t;
  const RetrievalSystem sys = make_retrieval_system({{"a", "", "lake"}}, t.enc);
  const MlpAdapter g = init_adapter(8, 16, 4, 2);
  PipelineConfig cfg;
  cfg.mode = PipelineMode::Vanilla;
  EXPECT_EQ(code_of([&] { run_lrag(t.lm, t.vocab, sys, g, cfg, "lake"); }), ErrorCode::ModeMismatch);
  cfg.mode = PipelineMode::Lrag;
  EXPECT_EQ(code_of([&] { run_baseline(t.lm, t.vocab, sys, cfg, "lake"); }), ErrorCode::ModeMismatch);
  cfg.layer = 3;
  EXPECT_EQ(code_of([&] { run_lrag(t.lm, t.vocab, sys, g, cfg, "lake"); }), ErrorCode::LayerOutOfRange);
  cfg.layer = 1;
  EXPECT_EQ(code_of([&] { run_lrag(t.lm, t.vocab, sys, init_adapter(8, 16, 5, 2), cfg, "lake"); }),
            ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([] { parse_mode("hyde"); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(parse_mode("no-retrieval"), PipelineMode::NoRetrieval);
}

TEST(Pipeline, NoRetrievalHasEmptyContext) {
  Tiny t;
  const RetrievalSystem sys = make_retrieval_system({{"a", "", "lake"}, {"b", "", "road"}}, t.enc);
  PipelineConfig cfg;
  cfg.mode = PipelineMode::NoRetrieval;
  cfg.max_new_tokens = 4;
  const auto r = run_baseline(t.lm, t.vocab, sys, cfg, "where is the lake");
  EXPECT_TRUE(r.retrieved.ranked.empty());
  EXPECT_EQ(r.answer, t.vocab.decode(generate_greedy(
                          t.lm, t.vocab.encode("Context: \nQuestion: where is the lake\nAnswer:"), 4)));
}

TEST(Pipeline, NextHopExcludesFirstHop) {
  const SyntheticWorld world = build_synthetic_world(512);
  SyntheticSpec spec;
  spec.num_examples = 30;
  spec.corpus_size = 80;
  const auto data = generate_synthetic_dataset(spec);
  const ToyLM lm = init_toy_lm(ToyLMConfig::make(512, 16, 2, 2, 256, 3));
  const RetrievalSystem sys = make_retrieval_system(data.corpus, make_doc_encoder(world.vocab, 8, 2));
  PipelineConfig cfg;
  cfg.layer = 2;
  cfg.max_new_tokens = 1;
  for (const auto& ex : data.examples) {
    // An adapter that points straight at a first-hop document.
    const MlpAdapter g = pointing_adapter(sys, 16, ex.first_hop_ids[0]);
    const auto r = run_lrag(lm, world.vocab, sys, g, cfg, ex.question);
    EXPECT_EQ(r.next_hop.ranked.size(), 2u);
    for (const auto& d : r.next_hop.ranked)
      for (const auto& f : r.first_hop.ranked) EXPECT_NE(d.id, f.id);
  }
}

TEST(Evaluate, PerfectAndEmptyIntersection) {
  const SyntheticWorld world = build_synthetic_world(512);
  SyntheticSpec spec;
  spec.num_examples = 1;
  spec.corpus_size = 20;
  auto data = generate_synthetic_dataset(spec);
  const ToyLM lm = init_toy_lm(ToyLMConfig::make(512, 16, 2, 2, 256, 3));
  const RetrievalSystem sys = make_retrieval_system(data.corpus, make_doc_encoder(world.vocab, 8, 2));
  const MlpAdapter g = pointing_adapter(sys, 16, data.examples[0].second_hop_ids[0]);
  PipelineConfig cfg;
  cfg.layer = 1;
  cfg.max_new_tokens = 2;
  const auto perfect = evaluate(lm, world.vocab, sys, &g, data.examples, cfg);
  EXPECT_EQ(perfect.recall_at_k, 1.0);
  EXPECT_EQ(perfect.failures, 0u);
  EXPECT_GT(perfect.mean_latency_seconds, 0.0);

  QAExample orphan = data.examples[0];
  orphan.documents[1].id = "not-in-corpus";
  orphan.second_hop_ids = {"not-in-corpus"};
  const auto none = evaluate(lm, world.vocab, sys, &g, {orphan}, cfg);
  EXPECT_EQ(none.recall_at_k, 0.0);
  EXPECT_EQ(none.accuracy, none.records[0].correct ? 1.0 : 0.0);

  EXPECT_EQ(code_of([&] { evaluate(lm, world.vocab, sys, &g, {}, cfg); }), ErrorCode::NoTrainingData);
  EXPECT_EQ(code_of([&] { evaluate(lm, world.vocab, sys, nullptr, data.examples, cfg); }), ErrorCode::InvalidConfig);
}

TEST(Evaluate, DeterministicApartFromLatency) {
  const SyntheticWorld world = build_synthetic_world(512);
  SyntheticSpec spec;
  spec.num_examples = 20;
  spec.corpus_size = 60;
  spec.leakage = 0.5;
  const auto data = generate_synthetic_dataset(spec);
  const ToyLM lm = init_toy_lm(ToyLMConfig::make(512, 16, 2, 2, 256, 3));
  const RetrievalSystem sys = make_retrieval_system(data.corpus, make_doc_encoder(world.vocab, 8, 2));
  const MlpAdapter g = init_adapter(16, 32, 8, 5);
  for (PipelineMode mode : {PipelineMode::Lrag, PipelineMode::Vanilla, PipelineMode::NoRetrieval}) {
    PipelineConfig cfg;
    cfg.mode = mode;
    cfg.layer = 1;
    cfg.max_new_tokens = 3;
    auto a = eval_report_json(evaluate(lm, world.vocab, sys, &g, data.examples, cfg));
    auto b = eval_report_json(evaluate(lm, world.vocab, sys, &g, data.examples, cfg));
    for (auto* j : {&a, &b}) {
      (*j)["aggregate"].erase("latency_s");
      for (auto& e : (*j)["examples"]) e.erase("latency_s");
    }
    EXPECT_EQ(a, b) << to_string(mode);
    EXPECT_EQ(a["aggregate"]["n_examples"], 20);
  }
}

TEST(Evaluate, SummaryCsv) {
  EvalReport r;
  r.mode = PipelineMode::Vanilla;
  r.k = 4;
  r.recall_at_k = 0.25;
  r.accuracy = 0.5;
  r.mean_latency_seconds = 0.125;
  EXPECT_EQ(eval_summary_csv(r), "mode,k,recall,accuracy,latency_s\nvanilla,4,0.25,0.5,0.125\n");
}

TEST(SelectLayer, SingleCandidateAndTieRule) {
  const SyntheticWorld world = build_synthetic_world(512);
  SyntheticSpec spec;
  spec.num_examples = 20;
  spec.corpus_size = 60;
  const auto data = generate_synthetic_dataset(spec);
  ToyLM lm = init_toy_lm(ToyLMConfig::make(512, 16, 3, 2, 256, 3));
  const RetrievalSystem sys = make_retrieval_system(data.corpus, make_doc_encoder(world.vocab, 8, 2));
  TrainConfig cfg;
  cfg.steps = 20;
  EXPECT_EQ(select_layer(lm, world.vocab, sys, data.examples, {2}, cfg, 2, 2).best_layer, 2u);

  // Zero blocks leave every layer's state equal, so every layer ties.
  for (auto& b : lm.blocks) b = zero_block(16);
  const auto sel = select_layer(lm, world.vocab, sys, data.examples, {3, 2, 1}, cfg, 2, 2);
  EXPECT_EQ(sel.recall_by_layer.at(1), sel.recall_by_layer.at(3));
  EXPECT_EQ(sel.best_layer, 1u);
  EXPECT_EQ(sel.adapters.size(), 3u);
  EXPECT_EQ(code_of([&] { select_layer(lm, world.vocab, sys, data.examples, {}, cfg, 2, 2); }),
            ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { select_layer(lm, world.vocab, sys, data.examples, {4}, cfg, 2, 2); }),
            ErrorCode::LayerOutOfRange);
}

TEST(SelectLayer, FindsPlantedLayer) {
  const SyntheticWorld world = build_synthetic_world(512);
  SyntheticSpec spec;
  spec.seed = 21;
  const auto data = generate_synthetic_dataset(spec);
  const ToyLM lm = build_planted_model(world.vocab, world.bridge_words(), PlantedSpec{});
  const RetrievalSystem sys = make_retrieval_system(data.corpus, make_doc_encoder(world.vocab, 32, 7));
  TrainConfig cfg;
  cfg.seed = 21;
  const auto sel = select_layer(lm, world.vocab, sys, data.examples, candidate_layers(1, 2, 4, 8), cfg, 2, 2);
  EXPECT_EQ(sel.best_layer, 4u);
  EXPECT_EQ(sel.recall_by_layer.size(), 5u);
}

TEST(Pipeline, TrainedAdapterRanksGoldFirst) {
  // Frozen after the first verified run.
  const SyntheticWorld world = build_synthetic_world(512);
  SyntheticSpec spec;
  spec.seed = 11;
  const auto data = generate_synthetic_dataset(spec);
  const ToyLM lm = build_planted_model(world.vocab, world.bridge_words(), PlantedSpec{});
  const RetrievalSystem sys = make_retrieval_system(data.corpus, make_doc_encoder(world.vocab, 32, 7));
  const auto states = collect_states(lm, world.vocab, sys, data.examples, 2);
  std::vector<std::size_t> all(data.examples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  TrainConfig tc;
  tc.seed = 3;
  const auto rep = train_on_layer(states, data.examples, all, 4, sys, tc, {});
  PipelineConfig cfg;
  cfg.layer = 4;
  cfg.max_new_tokens = 2;
  const auto r = run_lrag(lm, world.vocab, sys, rep.adapter, cfg, data.examples[0].question);
  EXPECT_EQ(data.examples[0].second_hop_ids[0], "doc-00121");
  EXPECT_EQ(r.next_hop.ranked[0].id, "doc-00121");
}
