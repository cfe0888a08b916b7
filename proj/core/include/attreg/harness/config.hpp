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
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "attreg/data/synthdata.hpp"
#include "attreg/model/model.hpp"
#include "attreg/reg/attreg.hpp"

namespace attreg::harness {

struct OptimizerConfig {
  double lr_pretrain = 3e-3;
  double lr_finetune = 1e-3;
  std::size_t pretrain_epochs = 30;
  std::size_t finetune_epochs = 8;
  std::size_t batch_size = 64;
  bool operator==(const OptimizerConfig&) const = default;
};

/// Everything one experiment needs. Text form (see parse_config):
///
///   [data]       num_objects, feature_dim, train_size, val_size, test_size,
///                bias, tail_decay, annotator_agreement, feature_noise,
///                prototype_scale
///   [model]      word_dim, question_dim, hidden_dim
///   [optimizer]  lr_pretrain, lr_finetune, pretrain_epochs, finetune_epochs,
///                batch_size
///   [attreg]     sigma, top_m, ignored_pct, lambda, frozen_attention
///   [experiment] seeds, modes, lambdas, baselines, faithfulness, jobs
///
/// List values are comma separated. Unknown keys are errors.
struct ExperimentConfig {
  data::DataConfig data;
  model::ModelConfig dims;
  OptimizerConfig optimizer;
  reg::RegConfig reg;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  /// Runs after pretraining. Known modes: plain, attreg, rand_mask, rand_img,
  /// attreg_e2e (regularized from the first epoch of a fresh model),
  /// uniform_attention (pretrain + plain fine-tune without learned attention).
  std::vector<std::string> modes = {"plain", "attreg"};
  /// Extra attreg runs, one per lambda (the grid of the lambda ablation).
  std::vector<double> lambdas;
  /// Prediction baselines scored on val and test.
  std::vector<std::string> baselines;
  /// Run the faithfulness probes on the plain fine-tuned model.
  bool faithfulness = false;
  /// Worker threads for independent seeds; 0 = hardware concurrency.
  std::size_t jobs = 0;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Throws ConfigError with the offending line number.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(to_text(c)) == c.
std::string to_text(const ExperimentConfig& config);

/// Hash of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Helpers shared with the command line.
std::vector<std::string> split_list(const std::string& value);

}  // namespace attreg::harness
