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

#include "attreg/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "attreg/error.hpp"
#include "attreg/rng.hpp"

namespace attreg::harness {

namespace {

const std::vector<std::string>& known_modes() {
  static const std::vector<std::string> modes = {"plain",     "attreg",     "rand_mask",
                                                 "rand_img",  "attreg_e2e", "uniform_attention"};
  return modes;
}

const std::vector<std::string>& known_baselines() {
  static const std::vector<std::string> b = {"random_predictions", "random_predictions_inverted",
                                             "top_ans_masked"};
  return b;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("not a number: '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("not a non-negative integer: '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("not a boolean: '" + v + "'");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
std::string join(const std::vector<T>& items, std::function<std::string(const T&)> f) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += f(items[i]);
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

std::map<std::string, Setter> setters() {
  std::map<std::string, Setter> s;
#define ATTREG_SIZE(key, field) s[key] = [](ExperimentConfig& c, const std::string& v) { c.field = static_cast<std::size_t>(to_uint(v)); }
#define ATTREG_REAL(key, field) s[key] = [](ExperimentConfig& c, const std::string& v) { c.field = to_double(v); }
  ATTREG_SIZE("data.num_objects", data.num_objects);
  ATTREG_SIZE("data.feature_dim", data.feature_dim);
  ATTREG_SIZE("data.train_size", data.train_size);
  ATTREG_SIZE("data.val_size", data.val_size);
  ATTREG_SIZE("data.test_size", data.test_size);
  ATTREG_REAL("data.bias", data.bias);
  ATTREG_REAL("data.tail_decay", data.tail_decay);
  ATTREG_REAL("data.annotator_agreement", data.annotator_agreement);
  ATTREG_REAL("data.feature_noise", data.feature_noise);
  ATTREG_REAL("data.prototype_scale", data.prototype_scale);
  ATTREG_SIZE("model.word_dim", dims.word_dim);
  ATTREG_SIZE("model.question_dim", dims.question_dim);
  ATTREG_SIZE("model.hidden_dim", dims.hidden_dim);
  ATTREG_REAL("optimizer.lr_pretrain", optimizer.lr_pretrain);
  ATTREG_REAL("optimizer.lr_finetune", optimizer.lr_finetune);
  ATTREG_SIZE("optimizer.pretrain_epochs", optimizer.pretrain_epochs);
  ATTREG_SIZE("optimizer.finetune_epochs", optimizer.finetune_epochs);
  ATTREG_SIZE("optimizer.batch_size", optimizer.batch_size);
  ATTREG_REAL("attreg.sigma", reg.sigma);
  ATTREG_SIZE("attreg.top_m", reg.top_m);
  ATTREG_REAL("attreg.ignored_pct", reg.ignored_pct);
  ATTREG_REAL("attreg.lambda", reg.lambda);
  ATTREG_SIZE("experiment.jobs", jobs);
#undef ATTREG_SIZE
#undef ATTREG_REAL
  s["attreg.frozen_attention"] = [](ExperimentConfig& c, const std::string& v) {
    c.reg.frozen_attention = to_bool(v);
  };
  s["experiment.faithfulness"] = [](ExperimentConfig& c, const std::string& v) {
    c.faithfulness = to_bool(v);
  };
  s["experiment.seeds"] = [](ExperimentConfig& c, const std::string& v) {
    c.seeds.clear();
    for (const auto& item : split_list(v)) c.seeds.push_back(to_uint(item));
  };
  s["experiment.modes"] = [](ExperimentConfig& c, const std::string& v) { c.modes = split_list(v); };
  s["experiment.lambdas"] = [](ExperimentConfig& c, const std::string& v) {
    c.lambdas.clear();
    for (const auto& item : split_list(v)) c.lambdas.push_back(to_double(item));
  };
  s["experiment.baselines"] = [](ExperimentConfig& c, const std::string& v) {
    c.baselines = split_list(v);
  };
  return s;
}

}  // namespace

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (optimizer.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(optimizer.lr_pretrain > 0.0) || !(optimizer.lr_finetune > 0.0)) {
    throw ConfigError("learning rates must be positive");
  }
  reg.validate();
  for (const auto& m : modes) {
    if (std::find(known_modes().begin(), known_modes().end(), m) == known_modes().end()) {
      throw ConfigError("unknown mode '" + m + "'");
    }
  }
  for (const auto& b : baselines) {
    if (std::find(known_baselines().begin(), known_baselines().end(), b) ==
        known_baselines().end()) {
      throw ConfigError("unknown baseline '" + b + "'");
    }
  }
  for (double l : lambdas)
    if (!(l >= 0.0)) throw ConfigError("lambdas must be >= 0");
}

ExperimentConfig parse_config(std::istream& in) {
  static const auto table = setters();
  ExperimentConfig config;
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      const std::string full = section.empty() ? key : section + "." + key;
      const auto it = table.find(full);
      if (it == table.end()) throw ConfigError("unknown key '" + full + "'");
      it->second(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

std::string to_text(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "[data]\n"
      << "num_objects = " << c.data.num_objects << "\n"
      << "feature_dim = " << c.data.feature_dim << "\n"
      << "train_size = " << c.data.train_size << "\n"
      << "val_size = " << c.data.val_size << "\n"
      << "test_size = " << c.data.test_size << "\n"
      << "bias = " << fmt(c.data.bias) << "\n"
      << "tail_decay = " << fmt(c.data.tail_decay) << "\n"
      << "annotator_agreement = " << fmt(c.data.annotator_agreement) << "\n"
      << "feature_noise = " << fmt(c.data.feature_noise) << "\n"
      << "prototype_scale = " << fmt(c.data.prototype_scale) << "\n\n"
      << "[model]\n"
      << "word_dim = " << c.dims.word_dim << "\n"
      << "question_dim = " << c.dims.question_dim << "\n"
      << "hidden_dim = " << c.dims.hidden_dim << "\n\n"
      << "[optimizer]\n"
      << "lr_pretrain = " << fmt(c.optimizer.lr_pretrain) << "\n"
      << "lr_finetune = " << fmt(c.optimizer.lr_finetune) << "\n"
      << "pretrain_epochs = " << c.optimizer.pretrain_epochs << "\n"
      << "finetune_epochs = " << c.optimizer.finetune_epochs << "\n"
      << "batch_size = " << c.optimizer.batch_size << "\n\n"
      << "[attreg]\n"
      << "sigma = " << fmt(c.reg.sigma) << "\n"
      << "top_m = " << c.reg.top_m << "\n"
      << "ignored_pct = " << fmt(c.reg.ignored_pct) << "\n"
      << "lambda = " << fmt(c.reg.lambda) << "\n"
      << "frozen_attention = " << (c.reg.frozen_attention ? "true" : "false") << "\n\n"
      << "[experiment]\n"
      << "seeds = "
      << join<std::uint64_t>(c.seeds, [](const std::uint64_t& s) { return std::to_string(s); })
      << "\n"
      << "modes = " << join<std::string>(c.modes, [](const std::string& s) { return s; }) << "\n"
      << "lambdas = " << join<double>(c.lambdas, [](const double& l) { return fmt(l); }) << "\n"
      << "baselines = " << join<std::string>(c.baselines, [](const std::string& s) { return s; })
      << "\n"
      << "faithfulness = " << (c.faithfulness ? "true" : "false") << "\n";
  return out.str();
}

std::string config_hash(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(to_text(config))));
  return buf;
}

}  // namespace attreg::harness
