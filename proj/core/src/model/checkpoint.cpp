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

#include "attreg/model/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "attreg/error.hpp"
#include "attreg/rng.hpp"

namespace attreg::model {

using nlohmann::json;

namespace {

json config_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},   {"word_dim", c.word_dim},
          {"question_dim", c.question_dim}, {"hidden_dim", c.hidden_dim},
          {"feature_dim", c.feature_dim}, {"num_answers", c.num_answers},
          {"max_question_length", c.max_question_length},
          {"uniform_attention", c.uniform_attention}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.word_dim = j.at("word_dim").get<std::size_t>();
  c.question_dim = j.at("question_dim").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.feature_dim = j.at("feature_dim").get<std::size_t>();
  c.num_answers = j.at("num_answers").get<std::size_t>();
  c.max_question_length = j.at("max_question_length").get<std::size_t>();
  c.uniform_attention = j.at("uniform_attention").get<bool>();
  return c;
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::uint64_t config_hash(const Model& model) {
  json j = {{"config", config_json(model.config)},
            {"answer_vocab", model.answer_vocab},
            {"question_vocab", model.question_vocab}};
  return fnv1a(j.dump());
}

std::uint64_t params_hash(const ModelParams& params) {
  std::uint64_t h = kFnvOffset;
  for (const auto& b : params.blocks()) {
    h = fnv1a(b.name(), h);
    h = fnv1a(b.values(), h);
  }
  return h;
}

void save_checkpoint(std::ostream& out, const Model& model) {
  json blocks = json::array();
  for (const auto& b : model.params.blocks()) {
    // Doubles round-trip exactly through nlohmann's shortest representation.
    blocks.push_back({{"name", b.name()},
                      {"shape", {b.shape().rows, b.shape().cols}},
                      {"values", std::vector<double>(b.values().begin(), b.values().end())}});
  }
  json j = {{"format_version", kCheckpointFormatVersion},
            {"config", config_json(model.config)},
            {"config_hash", hex(config_hash(model))},
            {"answer_vocab", model.answer_vocab},
            {"question_vocab", model.question_vocab},
            {"params", blocks}};
  out << j.dump() << '\n';
  if (!out) throw Error("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  save_checkpoint(out, model);
}

Model load_checkpoint(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw FormatError("checkpoint: unsupported format_version");
    }
    Model m;
    m.config = config_from(j.at("config"));
    m.answer_vocab = j.at("answer_vocab").get<std::vector<std::string>>();
    m.question_vocab = j.at("question_vocab").get<std::vector<std::string>>();
    if (m.answer_vocab.size() != m.config.num_answers ||
        m.question_vocab.size() != m.config.vocab_size) {
      throw FormatError("checkpoint: vocabulary sizes disagree with config");
    }
    if (j.at("config_hash").get<std::string>() != hex(config_hash(m))) {
      throw FormatError("checkpoint: config_hash mismatch");
    }
    m.params = zero_params(m.config);
    auto blocks = m.params.blocks();
    const auto& stored = j.at("params");
    if (stored.size() != blocks.size()) {
      throw FormatError("checkpoint: expected " + std::to_string(blocks.size()) +
                        " parameter blocks, found " + std::to_string(stored.size()));
    }
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& s = stored[i];
      const auto name = s.at("name").get<std::string>();
      if (name != blocks[i].name()) {
        throw FormatError("checkpoint: block " + std::to_string(i) + " is '" + name +
                          "', expected '" + blocks[i].name() + "'");
      }
      const auto shape = s.at("shape").get<std::vector<std::size_t>>();
      const auto values = s.at("values").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] != blocks[i].shape().rows ||
          shape[1] != blocks[i].shape().cols || values.size() != blocks[i].size()) {
        throw FormatError("checkpoint: shape mismatch in '" + name + "'");
      }
      auto dst = blocks[i].mutable_values();
      std::copy(values.begin(), values.end(), dst.begin());
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return load_checkpoint(in);
}

void require_answer_vocab(const Model& model, const std::vector<std::string>& answer_vocab) {
  if (model.answer_vocab != answer_vocab) {
    throw VocabularyError("checkpoint answer vocabulary (" +
                          std::to_string(model.answer_vocab.size()) +
                          " answers) differs from the dataset's (" +
                          std::to_string(answer_vocab.size()) + ")");
  }
}

}  // namespace attreg::model
