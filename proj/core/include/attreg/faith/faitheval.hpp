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
#include <span>
#include <string_view>
#include <vector>

#include "attreg/data/types.hpp"
#include "attreg/model/model.hpp"
#include "attreg/reg/attreg.hpp"

namespace attreg::faith {

/// 0.5 * sum |p1 - p2|. Throws ShapeError on a length mismatch.
double tvd(std::span<const double> p1, std::span<const double> p2);

enum class GroundingSource { kAttention, kGradient, kUniform };
std::string_view to_string(GroundingSource s);
/// Accepts "attention", "gradient", "uniform".
GroundingSource parse_source(std::string_view s);

/// relu(<d(sum of ground-truth logits)/dv_i, v_i>) per detection; exactly 0
/// for inactive detections. Ground truth = answers given by at least three
/// annotators, or the majority answer when none reaches three.
std::vector<double> gradient_saliency(const model::Model& model, const data::Scene& scene,
                                      const data::QAInstance& qa);

/// Per-detection weights of a grounding source; higher means more important.
/// The uniform source draws a pseudo-random weight from a hash of the
/// detection's features and `seed`, so it does not depend on detection order.
std::vector<double> source_weights(const model::Model& model, const data::Scene& scene,
                                   const data::QAInstance& qa, GroundingSource source,
                                   std::uint64_t seed = 0);

/// Positions of the active detections, most important first (ties by id).
std::vector<std::size_t> rank_detections(const data::Scene& scene,
                                         std::span<const double> weights);

/// Rank positions r (1-based, among K active) kept by (lo, hi]:
/// lo < 100 r / K <= hi. When no rank qualifies the first rank above lo is kept.
std::vector<std::size_t> kept_ranks(std::size_t active, double lo, double hi);

struct SweepResult {
  double lo = 0.0;
  double hi = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
  double mean_kept = 0.0;  // detections kept per instance
};

/// Keeps only the detections whose rank falls in (lo, hi], re-runs the model
/// and scores the argmax answer. Throws ConfigError unless 0 <= lo < hi <= 100.
SweepResult keep_interval_eval(const model::Model& model, const data::DatasetSplit& split,
                               double lo, double hi, GroundingSource source,
                               std::uint64_t seed = 0);

struct TVDRecord {
  std::size_t rank = 0;  // 1 = most important
  double mean_tvd = 0.0;
  std::size_t n = 0;     // instances with at least `rank` active detections
};

/// For each rank r, the mean TVD between the full prediction and the
/// prediction with only the rank-r detection masked. One record per rank up
/// to the split's object count.
std::vector<TVDRecord> region_tvd_curve(const model::Model& model,
                                        const data::DatasetSplit& split, GroundingSource source,
                                        std::uint64_t seed = 0);

/// Spearman rank correlation with average ranks for ties; 0 when either
/// input is constant. Throws ShapeError on a length mismatch.
double spearman(std::span<const double> x, std::span<const double> y);

/// Spearman correlation between rank and mean TVD of a curve.
double curve_correlation(const std::vector<TVDRecord>& curve);

/// Mean |V* ∩ V^o| over the split.
double ignored_key_count(const model::Model& model, const data::DatasetSplit& split,
                         const reg::RegConfig& config);

}  // namespace attreg::faith
