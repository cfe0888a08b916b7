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

#include "attreg/model/model.hpp"

#include <algorithm>
#include <cmath>

#include "attreg/data/synthdata.hpp"
#include "attreg/diff/ops.hpp"
#include "attreg/error.hpp"
#include "attreg/rng.hpp"

namespace attreg::model {

using namespace attreg::diff;

std::vector<Tensor> ModelParams::blocks() const {
  return {word_embeddings, gru_wz, gru_uz,   gru_bz,      gru_wr,   gru_ur,   gru_br,
          gru_wn,          gru_un, gru_bn,   gru_bhn,     attn_w,   attn_b,   attn_vector,
          v_proj_w,        v_proj_b, q_proj_w, q_proj_b,  cls_w1,   cls_b1,   cls_w2,
          cls_b2};
}

namespace {

struct BlockSpec {
  Tensor ModelParams::*member;
  const char* name;
  Shape shape;
  double init_scale;  // uniform(-scale, scale); 0 for zero-initialised biases
};

std::vector<BlockSpec> block_specs(const ModelConfig& c) {
  const double gru = 1.0 / std::sqrt(static_cast<double>(c.question_dim));
  auto xavier = [](std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  };
  const std::size_t dq = c.question_dim, dw = c.word_dim, dh = c.hidden_dim, dv = c.feature_dim;
  const std::size_t joint = 2 * dh;
  return {
      {&ModelParams::word_embeddings, "word_embeddings", {c.vocab_size, dw}, 1.0},
      {&ModelParams::gru_wz, "gru.w_z", {dw, dq}, gru},
      {&ModelParams::gru_uz, "gru.u_z", {dq, dq}, gru},
      {&ModelParams::gru_bz, "gru.b_z", {1, dq}, 0.0},
      {&ModelParams::gru_wr, "gru.w_r", {dw, dq}, gru},
      {&ModelParams::gru_ur, "gru.u_r", {dq, dq}, gru},
      {&ModelParams::gru_br, "gru.b_r", {1, dq}, 0.0},
      {&ModelParams::gru_wn, "gru.w_n", {dw, dq}, gru},
      {&ModelParams::gru_un, "gru.u_n", {dq, dq}, gru},
      {&ModelParams::gru_bn, "gru.b_n", {1, dq}, 0.0},
      {&ModelParams::gru_bhn, "gru.b_hn", {1, dq}, 0.0},
      {&ModelParams::attn_w, "attention.w", {dv + dq, dh}, xavier(dv + dq, dh)},
      {&ModelParams::attn_b, "attention.b", {1, dh}, 0.0},
      {&ModelParams::attn_vector, "attention.w_a", {dh, 1}, xavier(dh, 1)},
      {&ModelParams::v_proj_w, "predictor.v_proj.w", {dv, dh}, xavier(dv, dh)},
      {&ModelParams::v_proj_b, "predictor.v_proj.b", {1, dh}, 0.0},
      {&ModelParams::q_proj_w, "predictor.q_proj.w", {dq, dh}, xavier(dq, dh)},
      {&ModelParams::q_proj_b, "predictor.q_proj.b", {1, dh}, 0.0},
      {&ModelParams::cls_w1, "predictor.w1", {dh, joint}, xavier(dh, joint)},
      {&ModelParams::cls_b1, "predictor.b1", {1, joint}, 0.0},
      {&ModelParams::cls_w2, "predictor.w2", {joint, c.num_answers}, xavier(joint, c.num_answers)},
      {&ModelParams::cls_b2, "predictor.b2", {1, c.num_answers}, 0.0},
  };
}

void validate(const ModelConfig& c) {
  if (c.vocab_size == 0 || c.num_answers == 0 || c.word_dim == 0 || c.question_dim == 0 ||
      c.hidden_dim == 0 || c.feature_dim == 0) {
    throw ConfigError("model dimensions must all be positive");
  }
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  ModelParams p;
  Rng rng(derive_seed(seed, fnv1a("model-init")));
  for (const auto& spec : block_specs(config)) {
    std::vector<double> values(spec.shape.size(), 0.0);
    if (spec.init_scale > 0.0) {
      std::uniform_real_distribution<double> dist(-spec.init_scale, spec.init_scale);
      for (double& v : values) v = dist(rng);
    }
    p.*spec.member = Tensor::from(spec.shape, std::move(values), true);
    (p.*spec.member).set_name(spec.name);
  }
  return p;
}

ModelParams zero_params(const ModelConfig& config) {
  validate(config);
  ModelParams p;
  for (const auto& spec : block_specs(config)) {
    p.*spec.member = Tensor::zeros(spec.shape, true);
    (p.*spec.member).set_name(spec.name);
  }
  return p;
}

ModelParams clone_params(const ModelParams& params) {
  ModelParams out;
  const ModelConfig unused;
  for (const auto& spec : block_specs(unused)) {
    out.*spec.member = (params.*spec.member).clone(true);
  }
  return out;
}

Model make_model(const ModelConfig& dims, std::vector<std::string> answer_vocab,
                 std::uint64_t seed) {
  Model m;
  m.config = dims;
  m.question_vocab = data::default_lexicon().tokens();
  m.config.vocab_size = m.question_vocab.size();
  m.config.num_answers = answer_vocab.size();
  m.answer_vocab = std::move(answer_vocab);
  m.params = init_params(m.config, seed);
  return m;
}

Model clone_model(const Model& model) {
  Model m = model;
  m.params = clone_params(model.params);
  return m;
}

SceneInput scene_input(const data::Scene& scene, bool track_features) {
  if (scene.detections.empty()) throw ConfigError("scene " + scene.scene_id + " is empty");
  const std::size_t k = scene.detections.size();
  const std::size_t d = scene.detections.front().feature.size();
  std::vector<double> values;
  values.reserve(k * d);
  for (const auto& det : scene.detections) {
    if (det.feature.size() != d) throw ShapeError("detections have unequal feature sizes");
    values.insert(values.end(), det.feature.begin(), det.feature.end());
  }
  return {Tensor::from({k, d}, std::move(values), track_features), scene.active_mask()};
}

std::vector<std::size_t> encode_tokens(std::span<const std::string> tokens,
                                       const std::vector<std::string>& question_vocab) {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    auto it = std::find(question_vocab.begin(), question_vocab.end(), t);
    if (it == question_vocab.end()) {
      throw VocabularyError("question token '" + t + "' is not in the vocabulary");
    }
    ids.push_back(static_cast<std::size_t>(it - question_vocab.begin()));
  }
  return ids;
}

Tensor encode_question(const Model& model, std::span<const std::size_t> token_ids) {
  const auto& p = model.params;
  const std::size_t steps = std::min(token_ids.size(), model.config.max_question_length);
  Tensor h = Tensor::zeros({1, model.config.question_dim});
  if (steps == 0) return h;
  const Tensor x = gather_rows(p.word_embeddings, token_ids.first(steps));
  // Input projections for all steps at once.
  const Tensor xz = matmul(x, p.gru_wz);
  const Tensor xr = matmul(x, p.gru_wr);
  const Tensor xn = matmul(x, p.gru_wn);
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor z = sigmoid(add(add_row(slice_row(xz, t), p.gru_bz), matmul(h, p.gru_uz)));
    const Tensor r = sigmoid(add(add_row(slice_row(xr, t), p.gru_br), matmul(h, p.gru_ur)));
    const Tensor hn = add_row(matmul(h, p.gru_un), p.gru_bhn);
    const Tensor n = tanh(add(add_row(slice_row(xn, t), p.gru_bn), mul(r, hn)));
    h = add(n, mul(z, sub(h, n)));
  }
  return h;
}

Attention attend(const Model& model, const SceneInput& scene, const Tensor& question) {
  if (std::none_of(scene.mask.begin(), scene.mask.end(), [](bool b) { return b; })) {
    throw ConfigError("attend: no active detections");
  }
  const auto& p = model.params;
  const std::size_t k = scene.features.shape().rows;
  const Tensor joint = concat_cols(scene.features, repeat_rows(question, k));
  const Tensor hidden = tanh(add_row(matmul(joint, p.attn_w), p.attn_b));
  Attention out;
  out.scores = reshape(matmul(hidden, p.attn_vector), {1, k});
  out.weights = masked_softmax(
      model.config.uniform_attention ? Tensor::zeros({1, k}) : out.scores, scene.mask);
  return out;
}

Tensor fuse(const SceneInput& scene, const Tensor& weights) {
  return weighted_sum(scene.features, weights);
}

Prediction predict(const Model& model, const Tensor& fused, const Tensor& question) {
  const auto& p = model.params;
  const Tensor v = relu(add_row(matmul(fused, p.v_proj_w), p.v_proj_b));
  const Tensor q = relu(add_row(matmul(question, p.q_proj_w), p.q_proj_b));
  const Tensor hidden = relu(add_row(matmul(mul(v, q), p.cls_w1), p.cls_b1));
  Prediction out;
  out.logits = add_row(matmul(hidden, p.cls_w2), p.cls_b2);
  out.probs = sigmoid(out.logits);
  return out;
}

ModelOutput forward(const Model& model, const SceneInput& scene,
                    std::span<const std::size_t> token_ids) {
  ModelOutput out;
  out.question = encode_question(model, token_ids);
  auto att = attend(model, scene, out.question);
  out.scores = att.scores;
  out.attention = att.weights;
  out.fused = fuse(scene, out.attention);
  auto pred = predict(model, out.fused, out.question);
  out.logits = pred.logits;
  out.probs = pred.probs;
  return out;
}

ModelOutput forward(const Model& model, const data::Scene& scene,
                    std::span<const std::string> tokens) {
  const auto ids = encode_tokens(tokens, model.question_vocab);
  return forward(model, scene_input(scene), ids);
}

ForwardLoss forward_loss(const Model& model, const SceneInput& scene,
                         std::span<const std::size_t> token_ids, const Tensor& targets) {
  ForwardLoss out;
  out.output = forward(model, scene, token_ids);
  out.loss = sigmoid_bce_loss(out.output.logits, targets);
  return out;
}

ForwardLoss vqa_forward_loss(const Model& model, const data::Scene& scene,
                             const data::QAInstance& qa) {
  const auto ids = encode_tokens(qa.question_tokens, model.question_vocab);
  const Tensor y = Tensor::row(data::soft_targets(qa.answers, model.answer_vocab));
  return forward_loss(model, scene_input(scene), ids, y);
}

std::size_t predicted_index(const ModelOutput& out) {
  const auto p = out.probs.values();
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

}  // namespace attreg::model
