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
#include <vector>

#include "attreg/data/types.hpp"

namespace attreg::data {

struct DataConfig {
  std::size_t num_objects = 8;   // K
  std::size_t feature_dim = 32;  // d_v
  std::size_t train_size = 6000;
  std::size_t val_size = 1000;
  std::size_t test_size = 2000;
  /// Probability of the modal answer of each question type in train.
  double bias = 0.9;
  /// Geometric decay of the non-modal answer weights in the train prior.
  double tail_decay = 0.8;
  /// Probability that an annotator gives the scene-true answer.
  double annotator_agreement = 0.9;
  double feature_noise = 0.1;
  double prototype_scale = 0.5;

  bool operator==(const DataConfig&) const = default;
};

/// The three splits of one generated benchmark.
struct Benchmark {
  DatasetSplit train;
  DatasetSplit val;
  DatasetSplit test;
  /// Set when bias <= 0.5: the splits carry no usable prior shift.
  bool weak_bias = false;
  /// Train-time answer prior per question type (answer -> probability).
  std::map<std::string, std::map<std::string, double>> train_priors;
};

/// Generates train / in-domain val / OOD test splits. Train and val answers
/// follow per-question-type priors with modal mass `bias`; the OOD split uses
/// priors proportional to the inverse of the train priors. Output depends
/// only on (config, seed); every instance draws from its own substream.
/// Throws ConfigError for num_objects < 2 or out-of-range probabilities.
Benchmark generate_benchmark(const DataConfig& config, std::uint64_t seed);

/// The fixed answer vocabulary shared by every generated split.
std::vector<std::string> default_answer_vocab();

/// Soft supervision y_j = min(1, count(A_j) / 3) over `answer_vocab`.
/// Throws VocabularyError naming any answer outside the vocabulary.
std::vector<double> soft_targets(std::span<const std::string> answers,
                                 std::span<const std::string> answer_vocab);

/// Most frequent annotator answer, ties broken by first occurrence.
std::string majority_answer(std::span<const std::string> answers);

}  // namespace attreg::data
