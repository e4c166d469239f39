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

#include <cctype>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lrag/error.hpp"

namespace lrag {

using TokenId = std::size_t;

inline constexpr TokenId kUnkId = 0;
inline constexpr std::string_view kUnkWord = "<unk>";

/// Lowercases, drops ASCII punctuation and splits on whitespace.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else if (!std::ispunct(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

/// Closed word-level vocabulary; id 0 is reserved for unknown words.
class Vocabulary {
 public:
  Vocabulary() : words_{std::string(kUnkWord)} { index_[words_[0]] = kUnkId; }

  explicit Vocabulary(const std::vector<std::string>& words) : Vocabulary() {
    for (const auto& w : words) add(w);
  }

  TokenId add(const std::string& word) {
    auto it = index_.find(word);
    if (it != index_.end()) return it->second;
    words_.push_back(word);
    index_[word] = words_.size() - 1;
    return words_.size() - 1;
  }

  TokenId id(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnkId : it->second;
  }

  bool contains(const std::string& word) const { return index_.count(word) != 0; }

  const std::string& word(TokenId id) const {
    require(id < words_.size(), ErrorCode::TokenOutOfRange, "token id " + std::to_string(id));
    return words_[id];
  }

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<TokenId> encode(std::string_view text) const {
    std::vector<TokenId> ids;
    for (const auto& w : split_words(text)) ids.push_back(id(w));
    return ids;
  }

  std::string decode(const std::vector<TokenId>& ids) const {
    std::string out;
    for (TokenId t : ids) {
      if (!out.empty()) out.push_back(' ');
      out += word(t);
    }
    return out;
  }

  nlohmann::json to_json() const { return words_; }

  static Vocabulary from_json(const nlohmann::json& j) {
    require(j.is_array() && !j.empty() && j[0] == std::string(kUnkWord), ErrorCode::InvalidConfig,
            "vocabulary must be a JSON array starting with \"<unk>\"");
    Vocabulary v;
    for (std::size_t i = 1; i < j.size(); ++i) {
      const auto w = j[i].get<std::string>();
      require(!v.contains(w), ErrorCode::InvalidConfig, "duplicate vocabulary word '" + w + "'");
      v.add(w);
    }
    return v;
  }

  /// "w1" .. "w{n-1}" placeholder vocabulary of total size n.
  static Vocabulary placeholder(std::size_t n) {
    Vocabulary v;
    for (std::size_t i = 1; i < n; ++i) v.add("w" + std::to_string(i));
    return v;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace lrag
