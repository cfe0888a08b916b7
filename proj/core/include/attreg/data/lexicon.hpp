/*
 * Copyright 2026 The AttReg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace attreg::data {

/// Object categories the synthetic detector can emit.
std::span<const std::string> object_categories();
std::span<const std::string> color_words();
std::span<const std::string> size_words();

/// Question-word vocabulary with a noun flag per token.
class Lexicon {
 public:
  Lexicon() = default;
  void add(std::string token, bool noun);

  std::optional<std::size_t> id(std::string_view token) const;
  /// Unknown tokens are non-nouns.
  bool is_noun(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::vector<bool> noun_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Lexicon covering every token the question templates can produce.
const Lexicon& default_lexicon();

/// Nouns of `question_tokens` in order of first occurrence, without repeats.
std::vector<std::string> extract_nouns(std::span<const std::string> question_tokens,
                                       const Lexicon& lexicon);

/// Word vectors used to compare detector categories with question nouns.
class EmbeddingTable {
 public:
  void set(std::string token, std::vector<double> vec);
  const std::vector<double>* find(std::string_view token) const;
  /// Cosine similarity; 0 when either token is missing or a vector is zero.
  double cosine(std::string_view a, std::string_view b) const;

 private:
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// Toy embedding space: categories in the same super-class (animals,
/// vehicles, toys, household items) have cosine ~0.39, unrelated ones 0,
/// identical tokens 1.
const EmbeddingTable& default_embeddings();

}  // namespace attreg::data
