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

// First-hop sparse retrieval (Okapi BM25) and exhaustive inner-product
// retrieval over documents embedded by a frozen encoder.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "lrag/error.hpp"
#include "lrag/format.hpp"
#include "lrag/matrix.hpp"
#include "lrag/rng.hpp"
#include "lrag/tensor_store.hpp"
#include "lrag/tokenizer.hpp"

namespace lrag {

struct Document {
  std::string id;
  std::string title;
  std::string text;

  std::string full_text() const { return title.empty() ? text : title + " " + text; }

  bool operator==(const Document&) const = default;
};

struct ScoredDoc {
  std::string id;
  double score = 0.0;

  bool operator==(const ScoredDoc&) const = default;
};

/// Ranked by score descending, ties by id ascending.
struct RetrievalResult {
  std::vector<ScoredDoc> ranked;
  std::size_t k_requested = 0;

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& d : ranked) out.push_back(d.id);
    return out;
  }
};

inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

inline RetrievalResult top_k(std::vector<ScoredDoc> scored, std::size_t k) {
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(), ranks_before);
  scored.resize(n);
  return {std::move(scored), k};
}

inline void check_corpus(const std::vector<Document>& corpus) {
  if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "corpus has no documents");
  std::unordered_set<std::string> seen;
  for (const auto& d : corpus) {
    require(seen.insert(d.id).second, ErrorCode::InvalidExample, "duplicate document id '" + d.id + "'");
    require(!d.text.empty(), ErrorCode::InvalidExample, "document '" + d.id + "' has empty text");
  }
}

// ---------------------------------------------------------------------------
// BM25

struct Posting {
  std::size_t doc = 0;
  std::size_t tf = 0;
};

struct Bm25Index {
  std::unordered_map<std::string, std::vector<Posting>> postings;
  std::vector<std::string> doc_ids;
  std::vector<std::size_t> doc_lengths;
  double avg_doc_length = 0.0;
  std::size_t doc_count = 0;
  double k1 = 1.2;
  double b = 0.75;

  std::size_t document_frequency(const std::string& term) const {
    auto it = postings.find(term);
    return it == postings.end() ? 0 : it->second.size();
  }

  double idf(const std::string& term) const {
    const double n = static_cast<double>(doc_count);
    const double df = static_cast<double>(document_frequency(term));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  }
};

inline Bm25Index build_bm25_index(const std::vector<Document>& corpus, double k1 = 1.2, double b = 0.75) {
  if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "cannot index an empty corpus");
  Bm25Index index;
  index.k1 = k1;
  index.b = b;
  index.doc_count = corpus.size();
  double total = 0.0;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const auto words = split_words(corpus[d].full_text());
    std::map<std::string, std::size_t> tf;
    for (const auto& w : words) ++tf[w];
    for (const auto& [term, count] : tf) index.postings[term].push_back({d, count});
    index.doc_ids.push_back(corpus[d].id);
    index.doc_lengths.push_back(words.size());
    total += static_cast<double>(words.size());
  }
  index.avg_doc_length = total / static_cast<double>(corpus.size());
  return index;
}

/// Okapi BM25 over the distinct query terms. Only documents sharing at least
/// one term are ranked, so a query with no corpus terms yields no results.
inline RetrievalResult bm25_search(const Bm25Index& index, const std::string& query, std::size_t k) {
  require(k >= 1, ErrorCode::InvalidConfig, "k must be >= 1");
  const auto words = split_words(query);
  const std::set<std::string> terms(words.begin(), words.end());
  std::unordered_map<std::size_t, double> scores;
  const double avg = index.avg_doc_length > 0.0 ? index.avg_doc_length : 1.0;
  for (const auto& term : terms) {
    auto it = index.postings.find(term);
    if (it == index.postings.end()) continue;
    const double idf = index.idf(term);
    for (const auto& p : it->second) {
      const double tf = static_cast<double>(p.tf);
      const double len = static_cast<double>(index.doc_lengths[p.doc]);
      const double denom = tf + index.k1 * (1.0 - index.b + index.b * len / avg);
      scores[p.doc] += idf * tf * (index.k1 + 1.0) / denom;
    }
  }
  std::vector<ScoredDoc> scored;
  scored.reserve(scores.size());
  for (const auto& [doc, s] : scores) scored.push_back({index.doc_ids[doc], s});
  return top_k(std::move(scored), k);
}

// ---------------------------------------------------------------------------
// Dense retrieval

/// Frozen document encoder: mean of per-token projection rows, optionally
/// L2-normalized.
struct DocEncoder {
  Vocabulary vocab;
  Matrix projection;  // vocab x d_emb
  std::size_t d_emb = 0;
  bool normalize = true;
};

inline DocEncoder make_doc_encoder(const Vocabulary& vocab, std::size_t d_emb, std::uint64_t seed,
                                   bool normalize = true) {
  require(d_emb >= 1, ErrorCode::InvalidConfig, "d_emb must be >= 1");
  Rng rng = Rng(seed).split("doc_encoder");
  return {vocab, rng.gaussian_matrix(vocab.size(), d_emb, 1.0), d_emb, normalize};
}

inline void normalize_in_place(Vector& v) {
  const double n = norm2(v);
  if (n > 0.0)
    for (double& x : v) x /= n;
}

inline Vector encode_document(const DocEncoder& encoder, const std::string& text) {
  const auto ids = encoder.vocab.encode(text);
  if (ids.empty()) fail(ErrorCode::EmptyAfterTokenization, "text has no tokens");
  Vector out(encoder.d_emb, 0.0);
  for (TokenId id : ids) axpy(1.0, encoder.projection.row(id), out);
  for (double& x : out) x /= static_cast<double>(ids.size());
  if (encoder.normalize) normalize_in_place(out);
  return out;
}

inline Vector encode_document(const DocEncoder& encoder, const Document& doc) {
  return encode_document(encoder, doc.full_text());
}

struct DenseIndex {
  std::vector<std::string> doc_ids;
  Matrix embeddings;  // num_docs x d_emb
};

inline DenseIndex build_dense_index(const DocEncoder& encoder, const std::vector<Document>& corpus) {
  if (corpus.empty()) fail(ErrorCode::EmptyCorpus, "cannot index an empty corpus");
  DenseIndex index;
  index.embeddings = Matrix(corpus.size(), encoder.d_emb);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Vector e = encode_document(encoder, corpus[i]);
    std::copy(e.begin(), e.end(), index.embeddings.row(i).begin());
    index.doc_ids.push_back(corpus[i].id);
  }
  return index;
}

/// Exhaustive inner-product search; ids in `exclude` are skipped.
inline RetrievalResult dense_search(const DenseIndex& index, std::span<const double> query_vec, std::size_t k,
                                    const std::unordered_set<std::string>& exclude = {}) {
  require(query_vec.size() == index.embeddings.cols, ErrorCode::DimensionMismatch,
          "query has " + std::to_string(query_vec.size()) + " dims, index has " +
              std::to_string(index.embeddings.cols));
  require(k >= 1, ErrorCode::InvalidConfig, "k must be >= 1");
  std::vector<ScoredDoc> scored;
  scored.reserve(index.doc_ids.size());
  for (std::size_t i = 0; i < index.doc_ids.size(); ++i) {
    if (exclude.count(index.doc_ids[i])) continue;
    scored.push_back({index.doc_ids[i], dot(index.embeddings.row(i), query_vec)});
  }
  return top_k(std::move(scored), k);
}

inline void save_dense_index(const DenseIndex& index, const std::filesystem::path& tensor_path,
                             const std::filesystem::path& ids_path) {
  TensorStore store;
  store.put("embeddings", index.embeddings);
  save_tensor_file(store, tensor_path);
  write_text_file(ids_path, nlohmann::json(index.doc_ids).dump() + "\n");
}

inline DenseIndex load_dense_index(const std::filesystem::path& tensor_path, const std::filesystem::path& ids_path) {
  DenseIndex index;
  index.embeddings = get_matrix(load_tensor_file(tensor_path), "embeddings");
  index.doc_ids = nlohmann::json::parse(read_text_file(ids_path)).get<std::vector<std::string>>();
  require(index.doc_ids.size() == index.embeddings.rows, ErrorCode::ShapeMismatch,
          "dense index id list does not match the embedding rows");
  return index;
}

// ---------------------------------------------------------------------------
// Corpus I/O (JSON Lines)

inline nlohmann::json document_to_json(const Document& d) {
  return {{"id", d.id}, {"title", d.title}, {"text", d.text}};
}

inline Document document_from_json(const nlohmann::json& j) {
  try {
    return {j.at("id").get<std::string>(), j.value("title", std::string()), j.at("text").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidExample, std::string("bad document record: ") + e.what());
  }
}

inline std::string corpus_to_jsonl(const std::vector<Document>& corpus) {
  std::string out;
  for (const auto& d : corpus) out += document_to_json(d).dump() + "\n";
  return out;
}

inline std::vector<Document> corpus_from_jsonl(const std::string& text) {
  std::vector<Document> corpus;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      corpus.push_back(document_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::InvalidExample, "corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

}  // namespace lrag
