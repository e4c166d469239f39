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

// End-to-end multi-hop retrieval:
//
//   question --BM25--> first-hop docs --prompt--> toy LM --layer l--> r
//   r --g, f--> next-hop docs (first-hop ids excluded) --prompt--> answer
//
// plus the no-retrieval and single-shot BM25 baselines, the metrics and the
// evaluation harness.

#include <algorithm>
#include <chrono>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "lrag/dataset.hpp"
#include "lrag/error.hpp"
#include "lrag/format.hpp"
#include "lrag/rep_retriever.hpp"
#include "lrag/retrieval.hpp"
#include "lrag/toy_lm.hpp"

namespace lrag {

enum class PipelineMode { Lrag, Vanilla, NoRetrieval };

inline std::string to_string(PipelineMode m) {
  switch (m) {
    case PipelineMode::Lrag: return "lrag";
    case PipelineMode::Vanilla: return "vanilla";
    case PipelineMode::NoRetrieval: return "no-retrieval";
  }
  return "?";
}

inline PipelineMode parse_mode(const std::string& s) {
  if (s == "lrag" || s == "l-rag") return PipelineMode::Lrag;
  if (s == "vanilla") return PipelineMode::Vanilla;
  if (s == "no-retrieval" || s == "none") return PipelineMode::NoRetrieval;
  fail(ErrorCode::InvalidConfig, "unknown mode '" + s + "'");
}

struct PipelineConfig {
  std::size_t layer = 0;
  std::size_t first_hop_k = 2;
  std::size_t next_hop_k = 2;
  std::string prompt_template = std::string(kDefaultPromptTemplate);
  PipelineMode mode = PipelineMode::Lrag;
  std::size_t max_new_tokens = 16;

  std::size_t total_k() const { return first_hop_k + next_hop_k; }

  void validate(const ToyLM& lm) const {
    if (mode != PipelineMode::NoRetrieval)
      require(first_hop_k >= 1 && next_hop_k >= 1, ErrorCode::InvalidConfig, "retrieval budgets must be >= 1");
    if (mode == PipelineMode::Lrag)
      require(layer <= lm.config.n_layers, ErrorCode::LayerOutOfRange,
              "layer " + std::to_string(layer) + " > n_layers " + std::to_string(lm.config.n_layers));
  }
};

/// Everything the retrieval side needs: the corpus, its BM25 and dense
/// indexes, and the frozen encoder.
struct RetrievalSystem {
  std::vector<Document> corpus;
  std::unordered_map<std::string, std::size_t> row_of;
  Bm25Index bm25;
  DocEncoder encoder;
  DenseIndex dense;

  const Document& doc(const std::string& id) const {
    auto it = row_of.find(id);
    if (it == row_of.end()) fail(ErrorCode::NameNotFound, "no document '" + id + "'");
    return corpus[it->second];
  }
};

inline RetrievalSystem make_retrieval_system(std::vector<Document> corpus, DocEncoder encoder, double k1 = 1.2,
                                             double b = 0.75) {
  check_corpus(corpus);
  RetrievalSystem s;
  s.bm25 = build_bm25_index(corpus, k1, b);
  s.dense = build_dense_index(encoder, corpus);
  s.encoder = std::move(encoder);
  for (std::size_t i = 0; i < corpus.size(); ++i) s.row_of[corpus[i].id] = i;
  s.corpus = std::move(corpus);
  return s;
}

/// Keeps the last `limit` tokens.
inline std::vector<TokenId> keep_last(std::vector<TokenId> tokens, std::size_t limit) {
  if (tokens.size() > limit) tokens.erase(tokens.begin(), tokens.end() - static_cast<std::ptrdiff_t>(limit));
  return tokens;
}

inline std::vector<const Document*> docs_for(const RetrievalSystem& sys, const RetrievalResult& r) {
  std::vector<const Document*> out;
  for (const auto& d : r.ranked) out.push_back(&sys.doc(d.id));
  return out;
}

/// Prompt tokens for representation extraction: the first-hop context plus
/// the question.
inline std::vector<TokenId> first_hop_prompt_tokens(const ToyLM& lm, const Vocabulary& vocab,
                                                    const RetrievalSystem& sys, const std::string& tmpl,
                                                    const std::string& question, const RetrievalResult& first_hop) {
  auto tokens = vocab.encode(assemble_prompt(tmpl, question, docs_for(sys, first_hop)));
  if (tokens.empty()) tokens.push_back(kUnkId);
  return keep_last(std::move(tokens), lm.config.max_seq);
}

inline std::string generate_answer(const ToyLM& lm, const Vocabulary& vocab, const std::string& prompt,
                                   std::size_t max_new_tokens) {
  auto tokens = vocab.encode(prompt);
  if (tokens.empty()) tokens.push_back(kUnkId);
  const std::size_t room = lm.config.max_seq > max_new_tokens ? lm.config.max_seq - max_new_tokens : 1;
  return vocab.decode(generate_greedy(lm, keep_last(std::move(tokens), room), max_new_tokens));
}

struct LragResult {
  std::string answer;
  RetrievalResult first_hop;
  RetrievalResult next_hop;

  /// First-hop documents followed by next-hop documents.
  RetrievalResult combined() const {
    RetrievalResult r{first_hop.ranked, first_hop.k_requested + next_hop.k_requested};
    r.ranked.insert(r.ranked.end(), next_hop.ranked.begin(), next_hop.ranked.end());
    return r;
  }
};

inline LragResult run_lrag(const ToyLM& lm, const Vocabulary& vocab, const RetrievalSystem& sys, const MlpAdapter& g,
                           const PipelineConfig& cfg, const std::string& question) {
  if (cfg.mode != PipelineMode::Lrag) fail(ErrorCode::ModeMismatch, "run_lrag needs mode lrag, got " + to_string(cfg.mode));
  cfg.validate(lm);
  if (sys.corpus.empty()) fail(ErrorCode::EmptyCorpus, "corpus has no documents");
  require(g.d_model() == lm.config.d_model && g.d_emb() == sys.encoder.d_emb, ErrorCode::DimensionMismatch,
          "adapter dims do not match the model and encoder");

  LragResult out;
  out.first_hop = bm25_search(sys.bm25, question, cfg.first_hop_k);
  const auto tokens = first_hop_prompt_tokens(lm, vocab, sys, cfg.prompt_template, question, out.first_hop);
  const Vector rep = extract_representation(lm, tokens, cfg.layer);
  const Vector q = query_embedding(g, rep, sys.encoder.normalize);
  std::unordered_set<std::string> exclude;
  for (const auto& d : out.first_hop.ranked) exclude.insert(d.id);
  out.next_hop = dense_search(sys.dense, q, cfg.next_hop_k, exclude);

  const std::string prompt = assemble_prompt(cfg.prompt_template, question, docs_for(sys, out.combined()));
  out.answer = generate_answer(lm, vocab, prompt, cfg.max_new_tokens);
  return out;
}

struct BaselineResult {
  std::string answer;
  RetrievalResult retrieved;
};

inline BaselineResult run_baseline(const ToyLM& lm, const Vocabulary& vocab, const RetrievalSystem& sys,
                                   const PipelineConfig& cfg, const std::string& question) {
  if (cfg.mode == PipelineMode::Lrag) fail(ErrorCode::ModeMismatch, "run_baseline needs a baseline mode");
  cfg.validate(lm);
  BaselineResult out;
  if (cfg.mode == PipelineMode::Vanilla) out.retrieved = bm25_search(sys.bm25, question, cfg.total_k());
  const std::string prompt = assemble_prompt(cfg.prompt_template, question, docs_for(sys, out.retrieved));
  out.answer = generate_answer(lm, vocab, prompt, cfg.max_new_tokens);
  return out;
}

/// |retrieved ∩ gold| / |gold|.
inline double recall_at_k(const RetrievalResult& retrieved, const std::vector<std::string>& gold_ids) {
  if (gold_ids.empty()) fail(ErrorCode::EmptyGold, "recall needs at least one gold document");
  const std::unordered_set<std::string> gold(gold_ids.begin(), gold_ids.end());
  std::unordered_set<std::string> hit;
  for (const auto& d : retrieved.ranked)
    if (gold.count(d.id)) hit.insert(d.id);
  return static_cast<double>(hit.size()) / static_cast<double>(gold.size());
}

inline std::string normalize_answer_text(std::string_view s) {
  std::string out;
  bool space = false;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

/// Case-insensitive, whitespace-normalized containment.
inline bool accuracy_contains(std::string_view prediction, std::string_view gold) {
  const std::string g = normalize_answer_text(gold);
  if (g.empty()) return false;
  return normalize_answer_text(prediction).find(g) != std::string::npos;
}

struct ExampleRecord {
  std::string question;
  std::vector<std::string> retrieved_ids;
  std::string answer;
  double recall = 0.0;
  bool correct = false;
  double latency_seconds = 0.0;
  std::string error;
};

struct EvalReport {
  PipelineMode mode = PipelineMode::Lrag;
  std::size_t k = 0;
  double recall_at_k = 0.0;
  double accuracy = 0.0;
  double mean_latency_seconds = 0.0;
  std::size_t failures = 0;
  std::vector<ExampleRecord> records;
};

/// Runs every example through the configured mode. Failures are recorded
/// per example and count as zero recall and a wrong answer.
inline EvalReport evaluate(const ToyLM& lm, const Vocabulary& vocab, const RetrievalSystem& sys,
                           const MlpAdapter* g, const std::vector<QAExample>& dataset, const PipelineConfig& cfg) {
  if (dataset.empty()) fail(ErrorCode::NoTrainingData, "evaluation dataset is empty");
  if (cfg.mode == PipelineMode::Lrag && g == nullptr) fail(ErrorCode::InvalidConfig, "lrag mode needs an adapter");
  cfg.validate(lm);
  EvalReport report;
  report.mode = cfg.mode;
  report.k = cfg.mode == PipelineMode::NoRetrieval ? 0 : cfg.total_k();
  double recall_sum = 0.0, correct = 0.0, latency = 0.0;
  for (const auto& ex : dataset) {
    ExampleRecord rec;
    rec.question = ex.question;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      RetrievalResult retrieved;
      if (cfg.mode == PipelineMode::Lrag) {
        LragResult r = run_lrag(lm, vocab, sys, *g, cfg, ex.question);
        rec.answer = r.answer;
        retrieved = r.combined();
      } else {
        BaselineResult r = run_baseline(lm, vocab, sys, cfg, ex.question);
        rec.answer = r.answer;
        retrieved = r.retrieved;
      }
      rec.retrieved_ids = retrieved.ids();
      rec.recall = cfg.mode == PipelineMode::NoRetrieval ? 0.0 : recall_at_k(retrieved, ex.second_hop_ids);
      rec.correct = accuracy_contains(rec.answer, ex.final_answer);
    } catch (const Error& e) {
      rec.error = e.what();
      ++report.failures;
    }
    const auto t1 = std::chrono::steady_clock::now();
    rec.latency_seconds = std::max(std::chrono::duration<double>(t1 - t0).count(), 1e-9);
    recall_sum += rec.recall;
    correct += rec.correct ? 1.0 : 0.0;
    latency += rec.latency_seconds;
    report.records.push_back(std::move(rec));
  }
  const double n = static_cast<double>(dataset.size());
  report.recall_at_k = recall_sum / n;
  report.accuracy = correct / n;
  report.mean_latency_seconds = latency / n;
  return report;
}

inline nlohmann::json eval_report_json(const EvalReport& r) {
  nlohmann::json examples = nlohmann::json::array();
  for (const auto& rec : r.records) {
    nlohmann::json e = {{"question", rec.question},   {"retrieved_ids", rec.retrieved_ids},
                        {"answer", rec.answer},       {"recall", rec.recall},
                        {"correct", rec.correct},     {"latency_s", rec.latency_seconds}};
    if (!rec.error.empty()) e["error"] = rec.error;
    examples.push_back(std::move(e));
  }
  return {{"aggregate",
           {{"mode", to_string(r.mode)},
            {"k", r.k},
            {"recall", r.recall_at_k},
            {"accuracy", r.accuracy},
            {"latency_s", r.mean_latency_seconds},
            {"n_examples", r.records.size()},
            {"n_failures", r.failures}}},
          {"examples", examples}};
}

inline std::string eval_summary_csv(const EvalReport& r) {
  return "mode,k,recall,accuracy,latency_s\n" + to_string(r.mode) + "," + std::to_string(r.k) + "," +
         format_double(r.recall_at_k) + "," + format_double(r.accuracy) + "," +
         format_double(r.mean_latency_seconds) + "\n";
}

// ---------------------------------------------------------------------------
// Representations for training and layer selection

/// Per-example first-hop retrieval and the hidden states at every layer for
/// the resulting prompt (last token).
struct ExampleStates {
  RetrievalResult first_hop;
  std::vector<Vector> states;
};

inline std::vector<ExampleStates> collect_states(const ToyLM& lm, const Vocabulary& vocab,
                                                 const RetrievalSystem& sys, const std::vector<QAExample>& data,
                                                 std::size_t first_hop_k,
                                                 const std::string& tmpl = std::string(kDefaultPromptTemplate)) {
  std::vector<ExampleStates> out;
  out.reserve(data.size());
  for (const auto& ex : data) {
    ExampleStates es;
    es.first_hop = bm25_search(sys.bm25, ex.question, first_hop_k);
    es.states = forward(lm, first_hop_prompt_tokens(lm, vocab, sys, tmpl, ex.question, es.first_hop)).states;
    out.push_back(std::move(es));
  }
  return out;
}

struct AdapterSizing {
  std::size_t d_hidden = 0;  // 0: 2 * d_model
  double init_std = 0.02;
};

inline MlpAdapter fresh_adapter(std::size_t d_model, std::size_t d_emb, const AdapterSizing& sizing,
                                std::uint64_t seed) {
  return init_adapter(d_model, sizing.d_hidden ? sizing.d_hidden : 2 * d_model, d_emb, seed, sizing.init_std);
}

/// Trains an adapter on the states at `layer` of the chosen examples.
inline TrainReport train_on_layer(const std::vector<ExampleStates>& states, const std::vector<QAExample>& data,
                                  const std::vector<std::size_t>& indices, std::size_t layer,
                                  const RetrievalSystem& sys, const TrainConfig& cfg, const AdapterSizing& sizing) {
  std::vector<Vector> reps;
  std::vector<std::vector<std::size_t>> positives;
  for (std::size_t i : indices) {
    std::vector<std::size_t> rows;
    for (const auto& id : data[i].second_hop_ids) {
      auto it = sys.row_of.find(id);
      if (it != sys.row_of.end()) rows.push_back(it->second);
    }
    if (rows.empty()) continue;
    require(layer < states[i].states.size(), ErrorCode::LayerOutOfRange, "layer " + std::to_string(layer));
    reps.push_back(states[i].states[layer]);
    positives.push_back(std::move(rows));
  }
  if (reps.empty()) fail(ErrorCode::NoTrainingData, "no example has its second-hop document in the corpus");
  const MlpAdapter init = fresh_adapter(reps[0].size(), sys.encoder.d_emb, sizing, cfg.seed);
  return train_adapter_on_embeddings(init, reps, positives, sys.dense.embeddings, cfg, sys.encoder.normalize);
}

/// Mean next-hop Recall@k over the chosen examples (first-hop ids excluded).
inline double next_hop_recall(const MlpAdapter& g, const std::vector<ExampleStates>& states,
                              const std::vector<QAExample>& data, const std::vector<std::size_t>& indices,
                              std::size_t layer, const RetrievalSystem& sys, std::size_t k) {
  require(!indices.empty(), ErrorCode::NoTrainingData, "no examples to evaluate");
  double total = 0.0;
  for (std::size_t i : indices) {
    std::unordered_set<std::string> exclude;
    for (const auto& d : states[i].first_hop.ranked) exclude.insert(d.id);
    const Vector q = query_embedding(g, states[i].states[layer], sys.encoder.normalize);
    total += recall_at_k(dense_search(sys.dense, q, k, exclude), data[i].second_hop_ids);
  }
  return total / static_cast<double>(indices.size());
}

struct LayerSelection {
  std::size_t best_layer = 0;
  std::map<std::size_t, double> recall_by_layer;
  std::map<std::size_t, MlpAdapter> adapters;
};

/// Trains one adapter per candidate layer on a seeded 80% split and picks
/// the layer with the best validation Recall@k_eval; ties go to the smaller
/// layer.
inline LayerSelection select_layer(const ToyLM& lm, const Vocabulary& vocab, const RetrievalSystem& sys,
                                   const std::vector<QAExample>& dataset, const std::vector<std::size_t>& candidates,
                                   const TrainConfig& cfg, std::size_t k_eval, std::size_t first_hop_k,
                                   const AdapterSizing& sizing = {}) {
  require(!candidates.empty(), ErrorCode::InvalidConfig, "no candidate layers");
  if (dataset.empty()) fail(ErrorCode::NoTrainingData, "layer selection needs data");
  for (std::size_t l : candidates)
    require(l <= lm.config.n_layers, ErrorCode::LayerOutOfRange, "candidate layer " + std::to_string(l));
  const auto [train_idx, val_idx] = train_validation_split(dataset.size(), cfg.seed);
  const auto states = collect_states(lm, vocab, sys, dataset, first_hop_k);

  LayerSelection sel;
  double best = -1.0;
  std::vector<std::size_t> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (std::size_t layer : sorted) {
    TrainReport rep = train_on_layer(states, dataset, train_idx, layer, sys, cfg, sizing);
    const double recall = next_hop_recall(rep.adapter, states, dataset, val_idx, layer, sys, k_eval);
    sel.recall_by_layer[layer] = recall;
    if (recall > best) {
      best = recall;
      sel.best_layer = layer;
    }
    sel.adapters.emplace(layer, std::move(rep.adapter));
  }
  return sel;
}

}  // namespace lrag
