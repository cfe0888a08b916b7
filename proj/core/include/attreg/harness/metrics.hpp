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

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attreg/data/types.hpp"
#include "attreg/model/model.hpp"

namespace attreg::harness {

/// min(1, #annotators who gave `predicted` / 3).
double accuracy(std::string_view predicted, std::span<const std::string> answers);

struct CategoryMetrics {
  double accuracy = 0.0;
  std::size_t n = 0;
  bool operator==(const CategoryMetrics&) const = default;
};

struct MetricsRecord {
  std::string split;
  double overall = 0.0;
  std::size_t n = 0;
  /// Indexed like data::kAllCategories (yesno, number, other).
  std::array<CategoryMetrics, 3> categories{};

  const CategoryMetrics& category(data::QuestionCategory c) const;
  bool operator==(const MetricsRecord&) const = default;
};

/// Accumulates per-instance scores into a MetricsRecord.
class MetricsBuilder {
 public:
  explicit MetricsBuilder(std::string split) : split_(std::move(split)) {}
  void add(data::QuestionCategory category, double score);
  MetricsRecord finish() const;

 private:
  std::string split_;
  std::array<double, 3> sums_{};
  std::array<std::size_t, 3> counts_{};
};

/// Scores the argmax answer of every instance. Throws VocabularyError when the
/// model's answer vocabulary differs from the split's. Never modifies `model`.
MetricsRecord evaluate(const model::Model& model, const data::DatasetSplit& split);

/// Scores fixed predictions (one answer per instance).
MetricsRecord score_predictions(const data::DatasetSplit& split,
                                std::span<const std::string> predictions);

}  // namespace attreg::harness
