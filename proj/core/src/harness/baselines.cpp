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

#include "attreg/harness/baselines.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "attreg/data/synthdata.hpp"
#include "attreg/error.hpp"
#include "attreg/rng.hpp"

namespace attreg::harness {

std::string_view to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::kRandomPredictions: return "random_predictions";
    case BaselineKind::kRandomPredictionsInverted: return "random_predictions_inverted";
    case BaselineKind::kTopAnsMasked: return "top_ans_masked";
    case BaselineKind::kRandImg: return "rand_img";
    case BaselineKind::kRandMask: return "rand_mask";
  }
  return "?";
}

BaselineKind parse_baseline(std::string_view s) {
  for (auto k : {BaselineKind::kRandomPredictions, BaselineKind::kRandomPredictionsInverted,
                 BaselineKind::kTopAnsMasked, BaselineKind::kRandImg, BaselineKind::kRandMask}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown baseline '" + std::string(s) + "'");
}

AnswerHistograms AnswerHistograms::fit(const data::DatasetSplit& train) {
  std::map<std::string, std::map<std::string, double>> counts;
  for (const auto& ex : train.instances) {
    counts[ex.qa.question_type][data::majority_answer(ex.qa.answers)] += 1.0;
  }
  AnswerHistograms h;
  for (auto& [type, hist] : counts) {
    double total = 0.0;
    for (const auto& [a, c] : hist) total += c;
    for (auto& [a, c] : hist) c /= total;
    h.by_type[type] = std::move(hist);
  }
  return h;
}

AnswerHistograms AnswerHistograms::inverted() const {
  AnswerHistograms out;
  for (const auto& [type, hist] : by_type) {
    auto& inv = out.by_type[type];
    double total = 0.0;
    for (const auto& [a, p] : hist) total += inv[a] = 1.0 / p;
    for (auto& [a, p] : inv) p /= total;
  }
  return out;
}

const std::map<std::string, double>& AnswerHistograms::at(const std::string& type) const {
  const auto it = by_type.find(type);
  if (it == by_type.end()) throw ConfigError("no answer histogram for question type '" + type + "'");
  return it->second;
}

std::vector<std::string> sample_predictions(const AnswerHistograms& hist,
                                            const data::DatasetSplit& split, std::uint64_t seed) {
  Rng rng(derive_seed(seed, fnv1a("baseline-sample")));
  std::vector<std::string> out;
  out.reserve(split.instances.size());
  for (const auto& ex : split.instances) {
    const auto& h = hist.at(ex.qa.question_type);
    std::vector<double> weights;
    for (const auto& [a, p] : h) weights.push_back(p);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    out.push_back(std::next(h.begin(), static_cast<std::ptrdiff_t>(pick(rng)))->first);
  }
  return out;
}

std::size_t top_ans_masked_index(std::span<const double> scores) {
  if (scores.size() < 2) throw ShapeError("top_ans_masked needs at least two answers");
  std::vector<double> s(scores.begin(), scores.end());
  const auto top = std::max_element(s.begin(), s.end());
  *top = -std::numeric_limits<double>::infinity();
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

std::vector<std::string> top_ans_masked_predictions(const model::Model& model,
                                                    const data::DatasetSplit& split) {
  std::vector<std::string> out;
  out.reserve(split.instances.size());
  for (const auto& ex : split.instances) {
    const auto o = model::forward(model, ex.scene, ex.qa.question_tokens);
    out.push_back(model.answer_vocab[top_ans_masked_index(o.probs.values())]);
  }
  return out;
}

MetricsRecord run_baseline(BaselineKind kind, const data::DatasetSplit& train,
                           const data::DatasetSplit& split, std::uint64_t seed,
                           const model::Model* model) {
  switch (kind) {
    case BaselineKind::kRandomPredictions:
      return score_predictions(split, sample_predictions(AnswerHistograms::fit(train), split, seed));
    case BaselineKind::kRandomPredictionsInverted:
      return score_predictions(
          split, sample_predictions(AnswerHistograms::fit(train).inverted(), split, seed));
    case BaselineKind::kTopAnsMasked:
      if (model == nullptr) throw ConfigError("top_ans_masked needs a trained model");
      if (model->answer_vocab != split.answer_vocab) {
        throw VocabularyError("model answer vocabulary does not match split '" + split.name + "'");
      }
      return score_predictions(split, top_ans_masked_predictions(*model, split));
    case BaselineKind::kRandImg:
    case BaselineKind::kRandMask:
      break;
  }
  throw ConfigError(std::string(to_string(kind)) +
                    " is a training policy; train with it and call evaluate()");
}

}  // namespace attreg::harness
