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
#include <set>

#include <gtest/gtest.h>

#include "lrag/dataset.hpp"

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

SyntheticDataset make(double leakage, std::uint64_t seed, std::size_t n = 200, std::size_t corpus = 500) {
  SyntheticSpec s;
  s.num_examples = n;
  s.corpus_size = corpus;
  s.leakage = leakage;
  s.seed = seed;
  return generate_synthetic_dataset(s);
}

const Document& by_id(const std::vector<Document>& corpus, const std::string& id) {
  return *std::find_if(corpus.begin(), corpus.end(), [&](const Document& d) { return d.id == id; });
}

// Words of the second-hop document that appear in no first-hop document and
// are not the bridge or answer.
std::set<std::string> distinctive_words(const QAExample& ex) {
  std::set<std::string> hop1, out;
  for (const auto& w : split_words(ex.documents[0].full_text())) hop1.insert(w);
  const std::set<std::string> shared = {"was", "born", "in", "and", "known", "as", "the"};
  for (const auto& w : split_words(ex.documents[1].text))
    if (!hop1.count(w) && !shared.count(w) && w != ex.final_answer) out.insert(w);
  return out;
}

double vanilla_recall(const SyntheticDataset& d, std::size_t k) {
  const Bm25Index idx = build_bm25_index(d.corpus);
  double hits = 0.0;
  for (const auto& ex : d.examples)
    for (const auto& sd : bm25_search(idx, ex.question, k).ranked) hits += sd.id == ex.second_hop_ids[0];
  return hits / static_cast<double>(d.examples.size());
}

}  // namespace

TEST(SyntheticDataset, SameSeedSameFiles) {
  const auto a = make(0.5, 3), b = make(0.5, 3);
  EXPECT_EQ(corpus_to_jsonl(a.corpus), corpus_to_jsonl(b.corpus));
  EXPECT_EQ(dataset_to_jsonl(a.examples), dataset_to_jsonl(b.examples));
  EXPECT_NE(dataset_to_jsonl(make(0.5, 4).examples), dataset_to_jsonl(a.examples));
}

TEST(SyntheticDataset, ShapeAndHopInvariants) {
  const auto d = make(0.3, 1);
  EXPECT_EQ(d.corpus.size(), 500u);
  EXPECT_EQ(d.examples.size(), 200u);
  check_corpus(d.corpus);
  std::set<std::string> ids;
  for (const auto& doc : d.corpus) ids.insert(doc.id);
  for (const auto& ex : d.examples) {
    ASSERT_EQ(ex.first_hop_ids.size(), 1u);
    ASSERT_EQ(ex.second_hop_ids.size(), 1u);
    EXPECT_NE(ex.first_hop_ids[0], ex.second_hop_ids[0]);
    EXPECT_TRUE(ids.count(ex.first_hop_ids[0]));
    EXPECT_TRUE(ids.count(ex.second_hop_ids[0]));
    EXPECT_EQ(by_id(d.corpus, ex.second_hop_ids[0]), ex.documents[1]);
    // The chain: hop 1 names the bridge, hop 2 gives the answer.
    EXPECT_NE(ex.documents[0].text.find(ex.intermediate_answer), std::string::npos);
    EXPECT_NE(ex.documents[1].text.find(ex.final_answer), std::string::npos);
    EXPECT_EQ(ex.question.find(ex.intermediate_answer), std::string::npos);
  }
}

TEST(SyntheticDataset, LeakageZeroNeverSharesDistinctiveToken) {
  const auto d = make(0.0, 2);
  for (const auto& ex : d.examples) {
    const auto words = split_words(ex.question);
    for (const auto& w : distinctive_words(ex))
      EXPECT_EQ(std::count(words.begin(), words.end(), w), 0) << ex.question;
  }
  EXPECT_LE(vanilla_recall(d, 4), 0.05);
}

TEST(SyntheticDataset, LeakageOneAlwaysLeaks) {
  const auto d = make(1.0, 2);
  for (const auto& ex : d.examples) {
    const auto words = split_words(ex.question);
    bool leaked = false;
    for (const auto& w : distinctive_words(ex)) leaked |= std::count(words.begin(), words.end(), w) > 0;
    EXPECT_TRUE(leaked) << ex.question;
  }
  EXPECT_GE(vanilla_recall(d, 4), 0.9);
}

TEST(SyntheticDataset, WorldIndependentOfSeed) {
  const auto a = build_synthetic_world(512), b = build_synthetic_world(512);
  EXPECT_EQ(a.vocab.words(), b.vocab.words());
  EXPECT_EQ(a.vocab.size(), 512u);
  for (const auto& ex : make(1.0, 9, 50, 120).examples)
    for (const auto& w : split_words(ex.question + " " + ex.documents[0].text + " " + ex.documents[1].text))
      EXPECT_TRUE(a.vocab.contains(w)) << w;
}

TEST(SyntheticDataset, InvalidSpecs) {
  EXPECT_EQ(code_of([] { make(0.0, 0, 10, 19); }), ErrorCode::InvalidSpec);
  EXPECT_EQ(code_of([] { make(1.5, 0, 10, 20); }), ErrorCode::InvalidSpec);
  EXPECT_EQ(code_of([] { make(0.0, 0, 0, 20); }), ErrorCode::InvalidSpec);
  SyntheticSpec deep;
  deep.bridge_depth = 3;
  EXPECT_EQ(code_of([&] { generate_synthetic_dataset(deep); }), ErrorCode::InvalidSpec);
  SyntheticSpec tiny;
  tiny.vocab = 100;
  EXPECT_EQ(code_of([&] { generate_synthetic_dataset(tiny); }), ErrorCode::InvalidSpec);
}

TEST(QAExampleIo, RoundTripAndValidation) {
  const auto d = make(0.5, 5, 20, 60);
  EXPECT_EQ(dataset_from_jsonl(dataset_to_jsonl(d.examples)), d.examples);
  QAExample bad = d.examples[0];
  bad.second_hop_ids = bad.first_hop_ids;
  EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::InvalidExample);
  bad = d.examples[0];
  bad.final_answer.clear();
  EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::InvalidExample);
  bad = d.examples[0];
  bad.second_hop_ids = {"nowhere"};
  EXPECT_EQ(code_of([&] { bad.validate(); }), ErrorCode::InvalidExample);
  EXPECT_EQ(code_of([] { dataset_from_jsonl("{\"question\": \"q\"}\n"); }), ErrorCode::InvalidExample);
}

TEST(Prompt, TemplateFill) {
  const Document a{"1", "Title", "body one."}, b{"2", "", "body two"};
  EXPECT_EQ(assemble_prompt(kDefaultPromptTemplate, "who?", {&a, &b}),
            "Context: Title body one. body two\nQuestion: who?\nAnswer:");
  EXPECT_EQ(assemble_prompt(kDefaultPromptTemplate, "who?", {}), "Context: \nQuestion: who?\nAnswer:");
}

TEST(Split, EightyTwentyDeterministicPartition) {
  const auto [train, val] = train_validation_split(200, 7);
  EXPECT_EQ(train.size(), 160u);
  EXPECT_EQ(val.size(), 40u);
  std::set<std::size_t> all(train.begin(), train.end());
  all.insert(val.begin(), val.end());
  EXPECT_EQ(all.size(), 200u);
  EXPECT_EQ(train_validation_split(200, 7).first, train);
  EXPECT_NE(train_validation_split(200, 8).first, train);
  const auto [one_train, one_val] = train_validation_split(1, 0);
  EXPECT_EQ(one_train, one_val);
}
