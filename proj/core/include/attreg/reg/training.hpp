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
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "attreg/data/types.hpp"
#include "attreg/diff/adam.hpp"
#include "attreg/model/model.hpp"
#include "attreg/reg/attreg.hpp"
#include "attreg/rng.hpp"

namespace attreg::reg {

/// Extra samples added to each batch next to the original ones.
enum class CurationPolicy {
  kNone,      // plain VQA loss
  kAttReg,    // mask ignored key objects, zero target
  kRandMask,  // mask one uniformly chosen active detection, zero target
  kRandImg,   // question paired with a different scene, zero target
};

std::string_view to_string(CurationPolicy p);
/// Accepts "plain"/"none", "attreg", "rand_mask", "rand_img".
CurationPolicy parse_policy(std::string_view s);

struct TrainConfig {
  /// One learning rate per epoch; the number of entries is the epoch count.
  std::vector<double> epoch_lrs;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  CurationPolicy policy = CurationPolicy::kNone;
  RegConfig reg;
  /// Record the mean ignored-key count on the training split before the first
  /// epoch and after every epoch.
  bool track_ignored = true;
};

struct EpochStats {
  std::size_t epoch = 0;  // 0 = before training, then 1..E
  double mean_ignored_key_count = 0.0;
  double l_vqa = 0.0;     // mean over batches
  double l_reg = 0.0;     // mean over batches with curated samples
  std::size_t curated = 0;
  std::size_t skipped = 0;  // curated samples dropped for emptying the scene
  bool regularized = false;
};

struct TrainResult {
  model::Model model;
  std::vector<EpochStats> epochs;
};

/// Called after every epoch (1-based) with the current model.
using EpochHook = std::function<void(std::size_t epoch, const model::Model&)>;

/// Mini-batch Adam on L_vqa, plus lambda * L_reg over the policy's curated
/// samples from epoch reg.start_epoch on. Batch order depends only on `seed`.
TrainResult train(const model::Model& start, const data::DatasetSplit& train_split,
                  const TrainConfig& config, const EpochHook& hook = {});

/// Fine-tunes a pretrained model with attention regularization.
TrainResult finetune_with_attreg(const model::Model& pretrained,
                                 const data::DatasetSplit& train_split, const RegConfig& reg,
                                 double lr, std::size_t epochs, std::size_t batch_size,
                                 std::uint64_t seed, const EpochHook& hook = {});

/// Scene index paired with instance `i` by the rand_img policy: uniform over
/// the other n - 1 scenes.
std::size_t rand_img_partner(std::size_t i, std::size_t n, Rng& rng);

/// CSV with columns epoch,mean_ignored_key_count,L_vqa,L_reg,curated,skipped.
void write_epoch_csv(std::ostream& out, const std::vector<EpochStats>& stats);

}  // namespace attreg::reg
