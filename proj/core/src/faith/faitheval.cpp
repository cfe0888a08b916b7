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

#include "attreg/faith/faitheval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "attreg/data/synthdata.hpp"
#include "attreg/diff/ops.hpp"
#include "attreg/error.hpp"
#include "attreg/harness/metrics.hpp"
#include "attreg/rng.hpp"

namespace attreg::faith {

double tvd(std::span<const double> p1, std::span<const double> p2) {
  if (p1.size() != p2.size()) {
    throw ShapeError("tvd: lengths " + std::to_string(p1.size()) + " and " +
                     std::to_string(p2.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < p1.size(); ++i) s += std::abs(p1[i] - p2[i]);
  return 0.5 * s;
}

std::string_view to_string(GroundingSource s) {
  switch (s) {
    case GroundingSource::kAttention: return "attention";
    case GroundingSource::kGradient: return "gradient";
    case GroundingSource::kUniform: return "uniform";
  }
  return "?";
}

GroundingSource parse_source(std::string_view s) {
  if (s == "attention") return GroundingSource::kAttention;
  if (s == "gradient") return GroundingSource::kGradient;
  if (s == "uniform") return GroundingSource::kUniform;
  throw ConfigError("unknown grounding source '" + std::string(s) + "'");
}

namespace {

std::vector<std::size_t> ground_truth_indices(const model::Model& model,
                                              const data::QAInstance& qa) {
  const auto y = data::soft_targets(qa.answers, model.answer_vocab);
  std::vector<std::size_t> gt;
  for (std::size_t j = 0; j < y.size(); ++j)
    if (y[j] >= 1.0) gt.push_back(j);
  if (gt.empty()) {
    const auto majority = data::majority_answer(qa.answers);
    const auto it = std::find(model.answer_vocab.begin(), model.answer_vocab.end(), majority);
    gt.push_back(static_cast<std::size_t>(it - model.answer_vocab.begin()));
  }
  return gt;
}

std::vector<double> probs_of(const model::Model& model, const data::Scene& scene,
                             std::span<const std::size_t> ids) {
  const auto out = model::forward(model, model::scene_input(scene), ids);
  return {out.probs.values().begin(), out.probs.values().end()};
}

}  // namespace

std::vector<double> gradient_saliency(const model::Model& model, const data::Scene& scene,
                                      const data::QAInstance& qa) {
  if (qa.answers.empty()) throw ConfigError("gradient_saliency: no ground-truth answers");
  const auto ids = model::encode_tokens(qa.question_tokens, model.question_vocab);
  const auto gt = ground_truth_indices(model, qa);
  std::vector<double> selector(model.answer_vocab.size(), 0.0);
  for (auto j : gt) selector[j] = 1.0;

  auto input = model::scene_input(scene, true);
  {
    diff::Tape tape;
    const auto out = model::forward(model, input, ids);
    tape.backward(diff::sum(diff::mul(out.logits, diff::Tensor::row(selector))));
  }
  const auto& shape = input.features.shape();
  const auto values = input.features.values();
  const auto grad = input.features.grad();
  std::vector<double> saliency(shape.rows, 0.0);
  if (grad.empty()) return saliency;
  for (std::size_t i = 0; i < shape.rows; ++i) {
    if (!scene.detections[i].active) continue;
    double dot = 0.0;
    for (std::size_t j = 0; j < shape.cols; ++j) dot += grad[i * shape.cols + j] * values[i * shape.cols + j];
    saliency[i] = std::max(0.0, dot);
  }
  // The parameters were tracked too; leave no gradient behind.
  for (auto b : model.params.blocks()) b.zero_grad();
  return saliency;
}

std::vector<double> source_weights(const model::Model& model, const data::Scene& scene,
                                   const data::QAInstance& qa, GroundingSource source,
                                   std::uint64_t seed) {
  switch (source) {
    case GroundingSource::kAttention: {
      const auto out = model::forward(model, scene, qa.question_tokens);
      return {out.attention.values().begin(), out.attention.values().end()};
    }
    case GroundingSource::kGradient:
      return gradient_saliency(model, scene, qa);
    case GroundingSource::kUniform: {
      std::vector<double> w;
      for (const auto& d : scene.detections) {
        const auto h = mix64(fnv1a(std::span<const double>(d.feature), seed ^ 0x9e3779b97f4a7c15ULL));
        w.push_back(static_cast<double>(h >> 11) * 0x1.0p-53);
      }
      return w;
    }
  }
  return {};
}

std::vector<std::size_t> rank_detections(const data::Scene& scene,
                                         std::span<const double> weights) {
  if (weights.size() != scene.detections.size()) {
    throw ShapeError("rank_detections: weight count differs from detection count");
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (scene.detections[i].active) order.push_back(i);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (weights[a] != weights[b]) return weights[a] > weights[b];
    return scene.detections[a].id < scene.detections[b].id;
  });
  return order;
}

std::vector<std::size_t> kept_ranks(std::size_t active, double lo, double hi) {
  std::vector<std::size_t> kept;
  if (active == 0) return kept;
  const double k = static_cast<double>(active);
  for (std::size_t r = 1; r <= active; ++r) {
    const double pct = 100.0 * static_cast<double>(r) / k;
    if (pct > lo && pct <= hi) kept.push_back(r);
  }
  if (kept.empty()) {
    for (std::size_t r = 1; r <= active; ++r) {
      if (100.0 * static_cast<double>(r) / k > lo) {
        kept.push_back(r);
        break;
      }
    }
  }
  return kept;
}

SweepResult keep_interval_eval(const model::Model& model, const data::DatasetSplit& split,
                               double lo, double hi, GroundingSource source,
                               std::uint64_t seed) {
  if (!(lo >= 0.0 && lo < hi && hi <= 100.0)) {
    throw ConfigError("interval must satisfy 0 <= lo < hi <= 100");
  }
  SweepResult result{lo, hi, 0.0, split.instances.size(), 0.0};
  double total = 0.0, kept_total = 0.0;
  for (const auto& ex : split.instances) {
    const auto weights = source_weights(model, ex.scene, ex.qa, source, seed);
    const auto order = rank_detections(ex.scene, weights);
    const auto kept = kept_ranks(order.size(), lo, hi);
    data::Scene scene = ex.scene;
    std::vector<bool> keep(scene.detections.size(), false);
    for (auto r : kept) keep[order[r - 1]] = true;
    for (std::size_t i = 0; i < scene.detections.size(); ++i)
      if (!keep[i]) scene.detections[i].active = false;
    const auto out = model::forward(model, scene, ex.qa.question_tokens);
    total += harness::accuracy(model.answer_vocab[model::predicted_index(out)], ex.qa.answers);
    kept_total += static_cast<double>(kept.size());
  }
  if (result.n) {
    result.accuracy = total / static_cast<double>(result.n);
    result.mean_kept = kept_total / static_cast<double>(result.n);
  }
  return result;
}

std::vector<TVDRecord> region_tvd_curve(const model::Model& model,
                                        const data::DatasetSplit& split, GroundingSource source,
                                        std::uint64_t seed) {
  std::vector<TVDRecord> curve(split.num_objects);
  std::vector<double> sums(split.num_objects, 0.0);
  for (std::size_t r = 0; r < curve.size(); ++r) curve[r].rank = r + 1;
  for (const auto& ex : split.instances) {
    const auto ids = model::encode_tokens(ex.qa.question_tokens, model.question_vocab);
    const auto full = probs_of(model, ex.scene, ids);
    const auto weights = source_weights(model, ex.scene, ex.qa, source, seed);
    const auto order = rank_detections(ex.scene, weights);
    if (order.size() < 2) continue;  // removing the only detection is undefined
    for (std::size_t r = 0; r < order.size() && r < curve.size(); ++r) {
      data::Scene scene = ex.scene;
      scene.detections[order[r]].active = false;
      sums[r] += tvd(full, probs_of(model, scene, ids));
      ++curve[r].n;
    }
  }
  for (std::size_t r = 0; r < curve.size(); ++r) {
    if (curve[r].n) curve[r].mean_tvd = sums[r] / static_cast<double>(curve[r].n);
  }
  return curve;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ShapeError("spearman: lengths differ");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double curve_correlation(const std::vector<TVDRecord>& curve) {
  std::vector<double> ranks, values;
  for (const auto& rec : curve) {
    if (rec.n == 0) continue;
    ranks.push_back(static_cast<double>(rec.rank));
    values.push_back(rec.mean_tvd);
  }
  return spearman(ranks, values);
}

double ignored_key_count(const model::Model& model, const data::DatasetSplit& split,
                         const reg::RegConfig& config) {
  return reg::mean_ignored_key_count(model, split, config);
}

}  // namespace attreg::faith
