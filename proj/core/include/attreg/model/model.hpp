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
#include <string>
#include <vector>

#include "attreg/data/lexicon.hpp"
#include "attreg/data/types.hpp"
#include "attreg/diff/tensor.hpp"

namespace attreg::model {

using diff::Tensor;

struct ModelConfig {
  std::size_t vocab_size = 0;  // question tokens
  std::size_t word_dim = 16;
  std::size_t question_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t feature_dim = 32;
  std::size_t num_answers = 0;
  std::size_t max_question_length = data::kMaxQuestionLength;
  /// Replace learned attention with uniform weights over active detections.
  bool uniform_attention = false;

  bool operator==(const ModelConfig&) const = default;
};

/// All trainable tensors. Every block is a named requires_grad leaf.
struct ModelParams {
  Tensor word_embeddings;  // vocab x d_w

  // Single-layer GRU, gates z (update), r (reset), n (candidate).
  Tensor gru_wz, gru_uz, gru_bz;
  Tensor gru_wr, gru_ur, gru_br;
  Tensor gru_wn, gru_un, gru_bn, gru_bhn;

  // Attention scorer: s_i = w_a . tanh([v_i, q] W + b)
  Tensor attn_w, attn_b, attn_vector;

  // Answer predictor on relu(v W_v + b_v) * relu(q W_q + b_q).
  Tensor v_proj_w, v_proj_b, q_proj_w, q_proj_b;
  Tensor cls_w1, cls_b1, cls_w2, cls_b2;

  std::vector<Tensor> blocks() const;
};

ModelParams init_params(const ModelConfig& config, std::uint64_t seed);
/// Every weight and bias set to zero.
ModelParams zero_params(const ModelConfig& config);
ModelParams clone_params(const ModelParams& params);

struct Model {
  ModelConfig config;
  ModelParams params;
  std::vector<std::string> answer_vocab;
  std::vector<std::string> question_vocab;
};

/// Builds a freshly initialised model for the default lexicon.
Model make_model(const ModelConfig& dims, std::vector<std::string> answer_vocab,
                 std::uint64_t seed);
Model clone_model(const Model& model);

/// Detection features (K x d_v) plus the active mask.
struct SceneInput {
  Tensor features;
  std::vector<bool> mask;
};

/// With `track_features` the feature tensor is a requires_grad leaf so
/// gradients with respect to v_i can be read back after backward().
SceneInput scene_input(const data::Scene& scene, bool track_features = false);

/// Maps tokens to lexicon ids; throws VocabularyError for unknown tokens.
std::vector<std::size_t> encode_tokens(std::span<const std::string> tokens,
                                       const std::vector<std::string>& question_vocab);

struct ModelOutput {
  Tensor question;  // 1 x d_q
  Tensor scores;    // 1 x K
  Tensor attention; // 1 x K
  Tensor fused;     // 1 x d_v
  Tensor logits;    // 1 x |A|
  Tensor probs;     // 1 x |A|
};

/// Final GRU state over the first max_question_length tokens; the zero
/// vector for an empty question.
Tensor encode_question(const Model& model, std::span<const std::size_t> token_ids);

struct Attention {
  Tensor scores;
  Tensor weights;
};

/// Throws ConfigError when no detection is active.
Attention attend(const Model& model, const SceneInput& scene, const Tensor& question);

Tensor fuse(const SceneInput& scene, const Tensor& weights);

struct Prediction {
  Tensor logits;
  Tensor probs;
};

Prediction predict(const Model& model, const Tensor& fused, const Tensor& question);

ModelOutput forward(const Model& model, const SceneInput& scene,
                    std::span<const std::size_t> token_ids);
ModelOutput forward(const Model& model, const data::Scene& scene,
                    std::span<const std::string> tokens);

struct ForwardLoss {
  ModelOutput output;
  Tensor loss;  // summed over answers
};

/// Forward pass plus binary cross-entropy against `targets` (length |A|).
ForwardLoss forward_loss(const Model& model, const SceneInput& scene,
                         std::span<const std::size_t> token_ids, const Tensor& targets);

/// Forward pass plus loss against the soft targets of `qa`.
ForwardLoss vqa_forward_loss(const Model& model, const data::Scene& scene,
                             const data::QAInstance& qa);

/// Index of the highest-probability answer (lowest index on ties).
std::size_t predicted_index(const ModelOutput& out);

}  // namespace attreg::model
