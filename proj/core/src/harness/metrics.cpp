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

#include "attreg/harness/metrics.hpp"

#include <algorithm>

#include "attreg/error.hpp"

namespace attreg::harness {

double accuracy(std::string_view predicted, std::span<const std::string> answers) {
  const auto votes = std::count(answers.begin(), answers.end(), predicted);
  return std::min(1.0, static_cast<double>(votes) / 3.0);
}

const CategoryMetrics& MetricsRecord::category(data::QuestionCategory c) const {
  return categories[static_cast<std::size_t>(c)];
}

void MetricsBuilder::add(data::QuestionCategory category, double score) {
  const auto i = static_cast<std::size_t>(category);
  sums_[i] += score;
  ++counts_[i];
}

MetricsRecord MetricsBuilder::finish() const {
  MetricsRecord r;
  r.split = split_;
  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    r.categories[i].n = counts_[i];
    r.categories[i].accuracy = counts_[i] ? sums_[i] / static_cast<double>(counts_[i]) : 0.0;
    total += sums_[i];
    r.n += counts_[i];
  }
  r.overall = r.n ? total / static_cast<double>(r.n) : 0.0;
  return r;
}

MetricsRecord evaluate(const model::Model& model, const data::DatasetSplit& split) {
  if (model.answer_vocab != split.answer_vocab) {
    throw VocabularyError("model answer vocabulary does not match split '" + split.name + "'");
  }
  MetricsBuilder builder(split.name);
  for (const auto& ex : split.instances) {
    const auto out = model::forward(model, ex.scene, ex.qa.question_tokens);
    const auto& predicted = model.answer_vocab[model::predicted_index(out)];
    builder.add(ex.qa.question_category, accuracy(predicted, ex.qa.answers));
  }
  return builder.finish();
}

MetricsRecord score_predictions(const data::DatasetSplit& split,
                                std::span<const std::string> predictions) {
  if (predictions.size() != split.instances.size()) {
    throw ShapeError(std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(split.instances.size()) + " instances");
  }
  MetricsBuilder builder(split.name);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& qa = split.instances[i].qa;
    builder.add(qa.question_category, accuracy(predictions[i], qa.answers));
  }
  return builder.finish();
}

}  // namespace attreg::harness
