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

#include "attreg/data/lexicon.hpp"

#include <algorithm>
#include <cmath>

namespace attreg::data {

namespace {

const std::vector<std::string> kCategories = {"dog", "cat",     "bird", "car",  "bus", "bike",
                                              "ball", "frisbee", "kite", "cup", "chair", "hat"};
const std::vector<std::string> kColors = {"red",   "blue",  "green",  "yellow", "white",
                                          "black", "brown", "orange", "purple", "pink"};
const std::vector<std::string> kSizes = {"small", "medium", "large"};
const std::vector<std::string> kFunctionWords = {"what", "color", "is",   "the", "size",
                                                 "there", "a",    "how", "many", "are"};

// Category i belongs to super-class i / 3.
constexpr std::size_t kCategoriesPerGroup = 3;
constexpr double kGroupWeight = 0.8;

}  // namespace

std::span<const std::string> object_categories() { return kCategories; }
std::span<const std::string> color_words() { return kColors; }
std::span<const std::string> size_words() { return kSizes; }

void Lexicon::add(std::string token, bool noun) {
  if (index_.contains(token)) return;
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
  noun_.push_back(noun);
}

std::optional<std::size_t> Lexicon::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool Lexicon::is_noun(std::string_view token) const {
  auto i = id(token);
  return i.has_value() && noun_[*i];
}

const Lexicon& default_lexicon() {
  static const Lexicon lexicon = [] {
    Lexicon lex;
    for (const auto& w : kFunctionWords) lex.add(w, false);
    for (const auto& w : kColors) lex.add(w, false);
    for (const auto& w : kSizes) lex.add(w, false);
    for (const auto& w : kCategories) lex.add(w, true);
    // Common extra nouns so hand-written questions stay in-vocabulary.
    for (const char* w : {"grass", "table", "person"}) lex.add(w, true);
    for (const char* w : {"near", "on", "of", "in", "this", "picture", "do", "you", "see"}) {
      lex.add(w, false);
    }
    return lex;
  }();
  return lexicon;
}

std::vector<std::string> extract_nouns(std::span<const std::string> question_tokens,
                                       const Lexicon& lexicon) {
  std::vector<std::string> nouns;
  for (const auto& token : question_tokens) {
    if (!lexicon.is_noun(token)) continue;
    if (std::find(nouns.begin(), nouns.end(), token) == nouns.end()) nouns.push_back(token);
  }
  return nouns;
}

void EmbeddingTable::set(std::string token, std::vector<double> vec) {
  vectors_[std::move(token)] = std::move(vec);
}

const std::vector<double>* EmbeddingTable::find(std::string_view token) const {
  auto it = vectors_.find(std::string(token));
  return it == vectors_.end() ? nullptr : &it->second;
}

double EmbeddingTable::cosine(std::string_view a, std::string_view b) const {
  const auto* va = find(a);
  const auto* vb = find(b);
  if (va == nullptr || vb == nullptr || va->size() != vb->size()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < va->size(); ++i) {
    dot += (*va)[i] * (*vb)[i];
    na += (*va)[i] * (*va)[i];
    nb += (*vb)[i] * (*vb)[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

const EmbeddingTable& default_embeddings() {
  static const EmbeddingTable table = [] {
    EmbeddingTable t;
    const std::vector<std::string> extras = {"grass", "table", "person"};
    const std::size_t groups = kCategories.size() / kCategoriesPerGroup;
    const std::size_t own_dims = kCategories.size() + extras.size();
    const std::size_t dim = groups + own_dims;
    const double norm = std::sqrt(1.0 + kGroupWeight * kGroupWeight);
    for (std::size_t i = 0; i < kCategories.size(); ++i) {
      std::vector<double> v(dim, 0.0);
      v[i / kCategoriesPerGroup] = kGroupWeight / norm;
      v[groups + i] = 1.0 / norm;
      t.set(kCategories[i], std::move(v));
    }
    for (std::size_t i = 0; i < extras.size(); ++i) {
      std::vector<double> v(dim, 0.0);
      v[groups + kCategories.size() + i] = 1.0;
      t.set(extras[i], std::move(v));
    }
    return t;
  }();
  return table;
}

}  // namespace attreg::data
