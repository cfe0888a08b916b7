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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attreg/data/lexicon.hpp"
#include "attreg/data/types.hpp"
#include "attreg/diff/tensor.hpp"
#include "attreg/model/model.hpp"

namespace attreg::reg {

using diff::Tensor;

struct RegConfig {
  double sigma = 0.6;           // similarity threshold, compared with >=
  std::size_t top_m = 3;        // at most this many key objects
  double ignored_pct = 40.0;    // bottom N% of active detections by attention
  double lambda = 1.0;          // weight of the regularization loss
  std::size_t start_epoch = 0;  // first epoch (0-based) with regularization on
  /// Locate ignored objects with the attention of the starting model instead
  /// of the current one.
  bool frozen_attention = false;

  /// Throws ConfigError for out-of-range fields.
  void validate() const;
  bool operator==(const RegConfig&) const = default;
};

struct ScoredId {
  int id = 0;
  double score = 0.0;
  bool operator==(const ScoredId&) const = default;
};

struct KeyObjectReport {
  std::vector<ScoredId> key_ids;  // V*
  std::vector<int> ignored_ids;   // V^o
  std::vector<int> masked_ids;    // V* ∩ V^o, in key order
};

/// Same question on the scene with the ignored key objects deactivated,
/// supervised with an all-zero target.
struct CuratedSample {
  data::Scene scene;
  std::vector<std::string> question_tokens;
  std::vector<double> target;
};

struct CurateResult {
  std::optional<CuratedSample> sample;
  KeyObjectReport report;
  /// True when masking would have left no active detection.
  bool skipped_empty_scene = false;
};

/// score(d) = max over nouns of cosine(embed(category), embed(noun)); keeps
/// active detections with score >= sigma, best first (ties by ascending id),
/// at most top_m of them.
std::vector<ScoredId> identify_key_objects(const data::Scene& scene,
                                           std::span<const std::string> nouns,
                                           const data::EmbeddingTable& table, double sigma,
                                           std::size_t top_m);

/// Ids of the floor(K_active * pct / 100) active detections with the lowest
/// attention. Ranking is by alpha descending, ties by ascending id.
std::vector<int> locate_ignored(const data::Scene& scene, std::span<const double> alpha,
                                double ignored_pct);

CurateResult curate(const data::Scene& scene, const data::QAInstance& qa,
                    std::span<const ScoredId> key_ids, std::span<const int> ignored_ids,
                    std::size_t num_answers);

/// Key objects, ignored objects and their intersection for one instance
/// under the given attention weights.
KeyObjectReport key_object_report(const data::Scene& scene, const data::QAInstance& qa,
                                  std::span<const double> alpha, const RegConfig& config,
                                  const data::EmbeddingTable& table);

/// L_vqa + lambda * L_reg. An undefined L_reg (no curated samples) counts as 0.
Tensor combined_loss(const Tensor& l_vqa, const Tensor& l_reg, double lambda);
double combined_loss(double l_vqa, double l_reg, double lambda);

/// Mean of |V* ∩ V^o| over the split's instances under the model's attention.
double mean_ignored_key_count(const model::Model& model, const data::DatasetSplit& split,
                              const RegConfig& config);

}  // namespace attreg::reg
