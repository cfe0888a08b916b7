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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attreg/data/types.hpp"
#include "attreg/harness/metrics.hpp"
#include "attreg/model/model.hpp"

namespace attreg::harness {

enum class BaselineKind {
  kRandomPredictions,
  kRandomPredictionsInverted,
  kTopAnsMasked,
  kRandImg,   // training policy; see reg::CurationPolicy
  kRandMask,  // training policy; see reg::CurationPolicy
};

std::string_view to_string(BaselineKind k);
BaselineKind parse_baseline(std::string_view s);

/// Normalized answer frequencies per question type (majority answer of each
/// training instance).
struct AnswerHistograms {
  std::map<std::string, std::map<std::string, double>> by_type;

  static AnswerHistograms fit(const data::DatasetSplit& train);
  /// p(a) proportional to 1 / count(a) over the answers seen for each type.
  AnswerHistograms inverted() const;
  const std::map<std::string, double>& at(const std::string& question_type) const;
};

/// One answer per instance sampled from the histogram of its question type.
/// Throws ConfigError for question types the histograms have never seen.
std::vector<std::string> sample_predictions(const AnswerHistograms& hist,
                                            const data::DatasetSplit& split, std::uint64_t seed);

/// Index of the second-highest score: the top answer is pushed to the lowest
/// possible score and the argmax is taken again. Ties go to the lower index.
std::size_t top_ans_masked_index(std::span<const double> scores);

std::vector<std::string> top_ans_masked_predictions(const model::Model& model,
                                                    const data::DatasetSplit& split);

/// Scores a prediction baseline on `split`. `model` is only read by
/// top_ans_masked. rand_img and rand_mask are training policies and are
/// rejected here with ConfigError.
MetricsRecord run_baseline(BaselineKind kind, const data::DatasetSplit& train,
                           const data::DatasetSplit& split, std::uint64_t seed,
                           const model::Model* model = nullptr);

}  // namespace attreg::harness
