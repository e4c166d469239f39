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

// Multi-hop QA records and a seeded generator of two-hop synthetic corpora.
//
// Each generated example is a chain
//
//   question:  "where was the director of film <X1> <X2> born"
//   hop 1:     "<X1> <X2> is a film directed by <B1> <B2>"
//   hop 2:     "<B1> <B2> was born in <A> and was known as the <L>"
//
// with bridge entity B and answer A. With probability `leakage` the question
// also names the hop-2 token L, which lets a single lexical search find the
// hop-2 document without going through B.

#include <algorithm>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "lrag/error.hpp"
#include "lrag/retrieval.hpp"
#include "lrag/rng.hpp"
#include "lrag/tokenizer.hpp"

namespace lrag {

struct QAExample {
  std::string question;
  std::vector<Document> documents;
  std::string intermediate_answer;
  std::string final_answer;
  std::vector<std::string> first_hop_ids;
  std::vector<std::string> second_hop_ids;

  void validate() const {
    require(!intermediate_answer.empty() && !final_answer.empty(), ErrorCode::InvalidExample,
            "answers must be non-empty");
    std::unordered_set<std::string> ids;
    for (const auto& d : documents) ids.insert(d.id);
    const std::set<std::string> first(first_hop_ids.begin(), first_hop_ids.end());
    for (const auto& id : second_hop_ids)
      require(!first.count(id), ErrorCode::InvalidExample, "document '" + id + "' is in both hop sets");
    for (const auto* set : {&first_hop_ids, &second_hop_ids})
      for (const auto& id : *set)
        require(ids.count(id), ErrorCode::InvalidExample, "hop document '" + id + "' missing from documents");
  }

  bool operator==(const QAExample&) const = default;
};

inline nlohmann::json example_to_json(const QAExample& ex) {
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& d : ex.documents) docs.push_back(document_to_json(d));
  return {{"question", ex.question},
          {"documents", docs},
          {"intermediate_answer", ex.intermediate_answer},
          {"final_answer", ex.final_answer},
          {"first_hop_ids", ex.first_hop_ids},
          {"second_hop_ids", ex.second_hop_ids}};
}

inline QAExample example_from_json(const nlohmann::json& j) {
  QAExample ex;
  try {
    ex.question = j.at("question").get<std::string>();
    for (const auto& d : j.at("documents")) ex.documents.push_back(document_from_json(d));
    ex.intermediate_answer = j.at("intermediate_answer").get<std::string>();
    ex.final_answer = j.at("final_answer").get<std::string>();
    ex.first_hop_ids = j.at("first_hop_ids").get<std::vector<std::string>>();
    ex.second_hop_ids = j.at("second_hop_ids").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidExample, std::string("bad QA record: ") + e.what());
  }
  ex.validate();
  return ex;
}

inline std::string dataset_to_jsonl(const std::vector<QAExample>& data) {
  std::string out;
  for (const auto& ex : data) out += example_to_json(ex).dump() + "\n";
  return out;
}

inline std::vector<QAExample> dataset_from_jsonl(const std::string& text) {
  std::vector<QAExample> data;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      data.push_back(example_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidExample, "dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return data;
}

inline constexpr std::string_view kDefaultPromptTemplate = "Context: {context}\nQuestion: {question}\nAnswer:";

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

inline std::string assemble_prompt(std::string_view tmpl, const std::string& question,
                                   const std::vector<const Document*>& context) {
  std::string ctx;
  for (const Document* d : context) {
    if (!ctx.empty()) ctx += " ";
    ctx += d->full_text();
  }
  return replace_all(replace_all(std::string(tmpl), "{context}", ctx), "{question}", question);
}

// ---------------------------------------------------------------------------
// Synthetic two-hop data

struct SyntheticSpec {
  std::size_t num_examples = 200;
  std::size_t corpus_size = 500;
  std::size_t vocab = 512;
  std::size_t bridge_depth = 2;
  double leakage = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(num_examples >= 1, ErrorCode::InvalidSpec, "num_examples must be >= 1");
    require(corpus_size >= 2 * num_examples, ErrorCode::InvalidSpec,
            "corpus_size must be >= 2 * num_examples");
    require(bridge_depth == 2, ErrorCode::InvalidSpec, "only two-hop chains are supported");
    require(leakage >= 0.0 && leakage <= 1.0, ErrorCode::InvalidSpec, "leakage must lie in [0, 1]");
  }
};

/// Word pools of the synthetic world. Depends only on the vocabulary size, so
/// datasets drawn with different seeds share one vocabulary.
struct SyntheticWorld {
  Vocabulary vocab;
  std::vector<std::string> function_words;
  std::vector<std::string> subject_words;
  std::vector<std::string> bridge_first;
  std::vector<std::string> bridge_last;
  std::vector<std::string> answer_words;
  std::vector<std::string> filler_words;
  std::vector<std::string> leak_words;

  std::vector<std::string> bridge_words() const {
    std::vector<std::string> out = bridge_first;
    out.insert(out.end(), bridge_last.begin(), bridge_last.end());
    return out;
  }
};

inline constexpr std::size_t kSubjectPool = 24;
inline constexpr std::size_t kBridgePool = 16;
inline constexpr std::size_t kAnswerPool = 32;
inline constexpr std::size_t kFillerPool = 24;

inline SyntheticWorld build_synthetic_world(std::size_t vocab_size) {
  static const std::vector<std::string> kFunction = {
      "context", "question", "answer", "where", "was",    "the",    "director", "of",   "film",
      "born",    "is",       "a",      "directed", "by",  "in",     "and",      "known", "as",
      "village", "near",     "painter", "for",   "river", "who",    "made",     "its",   "people"};
  SyntheticWorld w;
  w.function_words = kFunction;
  const std::size_t fixed = 1 + kFunction.size() + kSubjectPool + 2 * kBridgePool + kAnswerPool + kFillerPool;
  require(vocab_size > fixed, ErrorCode::InvalidSpec,
          "vocab " + std::to_string(vocab_size) + " leaves no room for hop-2 tokens (needs > " +
              std::to_string(fixed) + ")");

  static const std::string consonants = "bdfgklmnprstvz";
  static const std::string vowels = "aeiou";
  std::vector<std::string> names;
  for (char c1 : consonants)
    for (char v1 : vowels)
      for (char c2 : consonants)
        for (char v2 : vowels) names.push_back(std::string{c1, v1, c2, v2});
  // Fixed key: the pools must not depend on any user seed.
  Rng order(0x5eed'0f'57a7e5ULL);
  order.shuffle(names);
  std::size_t next = 0;
  auto take = [&](std::size_t n) {
    std::vector<std::string> out(names.begin() + static_cast<std::ptrdiff_t>(next),
                                 names.begin() + static_cast<std::ptrdiff_t>(next + n));
    next += n;
    return out;
  };
  w.subject_words = take(kSubjectPool);
  w.bridge_first = take(kBridgePool);
  w.bridge_last = take(kBridgePool);
  w.answer_words = take(kAnswerPool);
  w.filler_words = take(kFillerPool);
  w.leak_words = take(vocab_size - fixed);

  for (const auto* pool : {&w.function_words, &w.subject_words, &w.bridge_first, &w.bridge_last, &w.answer_words,
                           &w.filler_words, &w.leak_words})
    for (const auto& word : *pool) w.vocab.add(word);
  return w;
}

struct SyntheticDataset {
  std::vector<Document> corpus;
  std::vector<QAExample> examples;
};

inline SyntheticDataset generate_synthetic_dataset(const SyntheticSpec& spec) {
  spec.validate();
  const SyntheticWorld w = build_synthetic_world(spec.vocab);
  require(spec.num_examples <= w.leak_words.size(), ErrorCode::InvalidSpec,
          "vocab too small for " + std::to_string(spec.num_examples) + " examples");
  require(spec.num_examples <= kBridgePool * kBridgePool, ErrorCode::InvalidSpec,
          "at most " + std::to_string(kBridgePool * kBridgePool) + " distinct bridge entities");
  const Rng root = Rng(spec.seed).split("data");

  auto pairs_from = [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& x : a)
      for (const auto& y : b)
        if (x != y) out.emplace_back(x, y);
    return out;
  };
  auto subjects = pairs_from(w.subject_words, w.subject_words);
  auto bridges = pairs_from(w.bridge_first, w.bridge_last);
  auto leaks = w.leak_words;
  {
    Rng r = root.split("entities");
    r.shuffle(subjects);
    r.shuffle(bridges);
    r.shuffle(leaks);
  }
  Rng pick = root.split("choices");

  struct Chain {
    Document hop1, hop2;
    std::string question, bridge, answer;
  };
  std::vector<Chain> chains;
  for (std::size_t i = 0; i < spec.num_examples; ++i) {
    const auto& [x1, x2] = subjects[i];
    const auto& [b1, b2] = bridges[i];
    const std::string& answer = w.answer_words[pick.below(w.answer_words.size())];
    const std::string& leak = leaks[i];
    const bool leaky = pick.uniform() < spec.leakage;
    Chain c;
    c.bridge = b1 + " " + b2;
    c.answer = answer;
    c.hop1 = {"", x1 + " " + x2, x1 + " " + x2 + " is a film directed by " + b1 + " " + b2 + "."};
    c.hop2 = {"", b1 + " " + b2,
              b1 + " " + b2 + " was born in " + answer + " and was known as the " + leak + "."};
    c.question = leaky ? "Where was the " + leak + " director of film " + x1 + " " + x2 + " born?"
                       : "Where was the director of film " + x1 + " " + x2 + " born?";
    chains.push_back(std::move(c));
  }

  // Distractors: villages that reuse subject words, and people that share one
  // bridge name with some chain but never a full bridge entity.
  std::vector<Document> docs;
  for (const auto& c : chains) {
    docs.push_back(c.hop1);
    docs.push_back(c.hop2);
  }
  std::set<std::pair<std::string, std::string>> used_bridges(bridges.begin(),
                                                              bridges.begin() + static_cast<std::ptrdiff_t>(spec.num_examples));
  Rng dr = root.split("distractors");
  const std::size_t n_distract = spec.corpus_size - 2 * spec.num_examples;
  for (std::size_t i = 0; i < n_distract; ++i) {
    const std::string f1 = w.filler_words[dr.below(w.filler_words.size())];
    const std::string f2 = w.filler_words[dr.below(w.filler_words.size())];
    if (i % 2 == 0) {
      const std::string s1 = w.subject_words[dr.below(w.subject_words.size())];
      const std::string s2 = w.subject_words[dr.below(w.subject_words.size())];
      const std::string a = w.answer_words[dr.below(w.answer_words.size())];
      docs.push_back({"", s1 + " " + s2, s1 + " " + s2 + " is a village near " + a + " known for its " + f1 + " " + f2 + "."});
    } else {
      std::pair<std::string, std::string> who;
      do {
        who = {w.bridge_first[dr.below(kBridgePool)], w.bridge_last[dr.below(kBridgePool)]};
      } while (used_bridges.count(who));
      docs.push_back({"", who.first + " " + who.second,
                      who.first + " " + who.second + " is a painter who made " + f1 + " " + f2 + "."});
    }
  }

  // Shuffle, then assign ids in corpus order.
  std::vector<std::size_t> order(docs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  root.split("corpus_order").shuffle(order);
  std::vector<std::string> id_of(docs.size());
  SyntheticDataset out;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "doc-%05zu", pos);
    id_of[order[pos]] = buf;
    Document d = docs[order[pos]];
    d.id = buf;
    out.corpus.push_back(std::move(d));
  }
  for (std::size_t i = 0; i < chains.size(); ++i) {
    Document h1 = chains[i].hop1, h2 = chains[i].hop2;
    h1.id = id_of[2 * i];
    h2.id = id_of[2 * i + 1];
    QAExample ex{chains[i].question, {h1, h2}, chains[i].bridge, chains[i].answer, {h1.id}, {h2.id}};
    ex.validate();
    out.examples.push_back(std::move(ex));
  }
  return out;
}

/// Deterministic 80/20 split of example indices by seeded shuffle. A single
/// example serves as both train and validation.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_validation_split(std::size_t n,
                                                                                             std::uint64_t seed,
                                                                                             double train_fraction = 0.8) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng(seed).split("split").shuffle(idx);
  std::size_t n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
  if (n >= 2) n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  else n_train = n;
  std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> val(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  if (val.empty()) val = train;
  return {train, val};
}

}  // namespace lrag
