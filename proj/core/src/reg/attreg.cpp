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

#include "attreg/reg/attreg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "attreg/diff/ops.hpp"
#include "attreg/error.hpp"

namespace attreg::reg {

void RegConfig::validate() const {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("sigma must lie in [0, 1]");
  if (top_m < 1) throw ConfigError("top_m must be at least 1");
  if (!(ignored_pct > 0.0 && ignored_pct <= 100.0)) {
    throw ConfigError("ignored_pct must lie in (0, 100]");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
}

std::vector<ScoredId> identify_key_objects(const data::Scene& scene,
                                           std::span<const std::string> nouns,
                                           const data::EmbeddingTable& table, double sigma,
                                           std::size_t top_m) {
  std::vector<ScoredId> keys;
  if (nouns.empty()) return keys;
  for (const auto& det : scene.detections) {
    if (!det.active) continue;
    double best = -1.0;
    for (const auto& noun : nouns) best = std::max(best, table.cosine(det.category, noun));
    if (best >= sigma) keys.push_back({det.id, best});
  }
  std::sort(keys.begin(), keys.end(), [](const ScoredId& a, const ScoredId& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  if (keys.size() > top_m) keys.resize(top_m);
  return keys;
}

std::vector<int> locate_ignored(const data::Scene& scene, std::span<const double> alpha,
                                double ignored_pct) {
  if (alpha.size() != scene.detections.size()) {
    throw ShapeError("locate_ignored: " + std::to_string(alpha.size()) + " weights for " +
                     std::to_string(scene.detections.size()) + " detections");
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (scene.detections[i].active) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (alpha[a] != alpha[b]) return alpha[a] > alpha[b];
    return scene.detections[a].id < scene.detections[b].id;
  });
  // Small epsilon so that e.g. 10 * 30 / 100 is not floored to 2.
  const auto count = static_cast<std::size_t>(
      std::floor(static_cast<double>(order.size()) * ignored_pct / 100.0 + 1e-9));
  std::vector<int> ids;
  for (std::size_t r = order.size() - std::min(count, order.size()); r < order.size(); ++r) {
    ids.push_back(scene.detections[order[r]].id);
  }
  return ids;
}

CurateResult curate(const data::Scene& scene, const data::QAInstance& qa,
                    std::span<const ScoredId> key_ids, std::span<const int> ignored_ids,
                    std::size_t num_answers) {
  CurateResult out;
  out.report.key_ids.assign(key_ids.begin(), key_ids.end());
  out.report.ignored_ids.assign(ignored_ids.begin(), ignored_ids.end());
  for (const auto& k : key_ids) {
    if (std::find(ignored_ids.begin(), ignored_ids.end(), k.id) != ignored_ids.end()) {
      out.report.masked_ids.push_back(k.id);
    }
  }
  if (out.report.masked_ids.empty()) return out;
  CuratedSample sample{scene, qa.question_tokens, std::vector<double>(num_answers, 0.0)};
  for (int id : out.report.masked_ids) sample.scene.deactivate(id);
  if (sample.scene.active_count() == 0) {
    out.skipped_empty_scene = true;
    return out;
  }
  out.sample = std::move(sample);
  return out;
}

KeyObjectReport key_object_report(const data::Scene& scene, const data::QAInstance& qa,
                                  std::span<const double> alpha, const RegConfig& config,
                                  const data::EmbeddingTable& table) {
  const auto keys = identify_key_objects(scene, qa.nouns, table, config.sigma, config.top_m);
  const auto ignored = locate_ignored(scene, alpha, config.ignored_pct);
  return curate(scene, qa, keys, ignored, 0).report;
}

Tensor combined_loss(const Tensor& l_vqa, const Tensor& l_reg, double lambda) {
  if (!l_reg.defined()) return l_vqa;
  return diff::add(l_vqa, diff::affine(l_reg, lambda, 0.0));
}

double combined_loss(double l_vqa, double l_reg, double lambda) { return l_vqa + lambda * l_reg; }

double mean_ignored_key_count(const model::Model& model, const data::DatasetSplit& split,
                              const RegConfig& config) {
  if (split.instances.empty()) return 0.0;
  const auto& table = data::default_embeddings();
  std::size_t total = 0;
  for (const auto& ex : split.instances) {
    const auto out = model::forward(model, ex.scene, ex.qa.question_tokens);
    total += key_object_report(ex.scene, ex.qa, out.attention.values(), config, table)
                 .masked_ids.size();
  }
  return static_cast<double>(total) / static_cast<double>(split.instances.size());
}

}  // namespace attreg::reg
