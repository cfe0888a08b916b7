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

#include "attreg/data/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "attreg/data/lexicon.hpp"
#include "attreg/error.hpp"
#include "attreg/rng.hpp"

namespace attreg::data {

namespace {

struct QuestionTemplate {
  std::string type;
  QuestionCategory category;
  std::vector<std::string> answers;
  double share;
};

std::vector<QuestionTemplate> question_templates() {
  const auto colors = color_words();
  const auto sizes = size_words();
  return {
      {"what color", QuestionCategory::kOther, {colors.begin(), colors.end()}, 0.30},
      {"what size", QuestionCategory::kOther, {sizes.begin(), sizes.end()}, 0.20},
      {"is the", QuestionCategory::kYesNo, {"yes", "no"}, 0.25},
      {"is there", QuestionCategory::kYesNo, {"yes", "no"}, 0.10},
      {"how many", QuestionCategory::kNumber, {"1", "2", "3", "4"}, 0.15},
  };
}

using Prior = std::map<std::string, double>;

// Modal answer gets `bias`; the rest share 1 - bias with geometric decay.
// The answer order is a seed-dependent permutation.
Prior make_train_prior(const QuestionTemplate& t, double bias, double decay, Rng& rng) {
  std::vector<std::string> order = t.answers;
  std::shuffle(order.begin(), order.end(), rng);
  Prior prior;
  prior[order[0]] = bias;
  double tail_total = 0.0;
  for (std::size_t k = 1; k < order.size(); ++k) tail_total += std::pow(decay, double(k - 1));
  for (std::size_t k = 1; k < order.size(); ++k) {
    prior[order[k]] = (1.0 - bias) * std::pow(decay, double(k - 1)) / tail_total;
  }
  return prior;
}

Prior invert_prior(const Prior& prior) {
  Prior inv;
  double z = 0.0;
  for (const auto& [a, p] : prior) {
    inv[a] = 1.0 / p;
    z += inv[a];
  }
  for (auto& [a, p] : inv) p /= z;
  return inv;
}

template <class T>
const T& pick(const std::vector<T>& items, Rng& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, items.size() - 1);
  return items[dist(rng)];
}

std::string sample_answer(const Prior& prior, const std::vector<std::string>& feasible,
                          Rng& rng) {
  std::vector<double> weights;
  for (const auto& a : feasible) weights.push_back(prior.at(a));
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return feasible[dist(rng)];
}

struct Prototypes {
  std::map<std::string, std::vector<double>> category, color, size;
};

Prototypes make_prototypes(const DataConfig& config, Rng& rng) {
  std::normal_distribution<double> normal(0.0, config.prototype_scale);
  auto draw = [&] {
    std::vector<double> v(config.feature_dim);
    for (double& x : v) x = normal(rng);
    return v;
  };
  Prototypes p;
  for (const auto& c : object_categories()) p.category[c] = draw();
  for (const auto& c : color_words()) p.color[c] = draw();
  for (const auto& s : size_words()) p.size[s] = draw();
  return p;
}

struct ObjectSpec {
  std::string category, color, size;
};

class InstanceBuilder {
 public:
  InstanceBuilder(const DataConfig& config, const Prototypes& protos)
      : config_(config), protos_(protos) {
    const auto cats = object_categories();
    const auto cols = color_words();
    const auto sizes = size_words();
    categories_.assign(cats.begin(), cats.end());
    colors_.assign(cols.begin(), cols.end());
    sizes_.assign(sizes.begin(), sizes.end());
  }

  Example build(const std::string& split, std::size_t index, const QuestionTemplate& tmpl,
                const Prior& prior, Rng& rng) const {
    const std::string noun = pick(categories_, rng);
    std::vector<std::string> feasible;
    for (const auto& a : tmpl.answers) {
      if (tmpl.type == "how many" && std::stoul(a) > config_.num_objects) continue;
      feasible.push_back(a);
    }
    const std::string answer = sample_answer(prior, feasible, rng);

    std::vector<ObjectSpec> objects;
    std::vector<std::string> tokens;
    std::size_t target_count = 1;
    if (tmpl.type == "how many") target_count = std::stoul(answer);
    if (tmpl.type == "is there" && answer == "no") target_count = 0;

    for (std::size_t i = 0; i < target_count; ++i) {
      objects.push_back({noun, pick(colors_, rng), pick(sizes_, rng)});
    }
    if (tmpl.type == "what color") {
      objects[0].color = answer;
      tokens = {"what", "color", "is", "the", noun};
    } else if (tmpl.type == "what size") {
      objects[0].size = answer;
      tokens = {"what", "size", "is", "the", noun};
    } else if (tmpl.type == "is the") {
      const std::string asked = pick(sizes_, rng);
      if (answer == "yes") {
        objects[0].size = asked;
      } else {
        std::vector<std::string> others;
        for (const auto& s : sizes_)
          if (s != asked) others.push_back(s);
        objects[0].size = pick(others, rng);
      }
      tokens = {"is", "the", noun, asked};
    } else if (tmpl.type == "is there") {
      tokens = {"is", "there", "a", noun};
    } else {
      tokens = {"how", "many", noun, "are", "there"};
    }

    std::vector<std::string> distractor_categories;
    for (const auto& c : categories_)
      if (c != noun) distractor_categories.push_back(c);
    while (objects.size() < config_.num_objects) {
      objects.push_back({pick(distractor_categories, rng), pick(colors_, rng), pick(sizes_, rng)});
    }
    std::shuffle(objects.begin(), objects.end(), rng);

    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "%06zu", index);
    Example ex;
    ex.scene.scene_id = "s-" + split + "-" + id_buf;
    ex.qa.qid = split + "-" + id_buf;
    ex.qa.scene_id = ex.scene.scene_id;

    std::normal_distribution<double> noise(0.0, config_.feature_noise);
    std::uniform_real_distribution<double> corner(0.0, 0.8);
    std::uniform_real_distribution<double> extent(0.05, 0.2);
    for (std::size_t i = 0; i < objects.size(); ++i) {
      ObjectDetection d;
      d.id = static_cast<int>(i);
      d.category = objects[i].category;
      d.attributes = {objects[i].color, objects[i].size};
      d.feature.resize(config_.feature_dim);
      const auto& pc = protos_.category.at(d.category);
      const auto& pcol = protos_.color.at(objects[i].color);
      const auto& ps = protos_.size.at(objects[i].size);
      for (std::size_t j = 0; j < config_.feature_dim; ++j) {
        d.feature[j] = pc[j] + pcol[j] + ps[j] + noise(rng);
      }
      const double x1 = corner(rng), y1 = corner(rng);
      d.box = {x1, y1, x1 + extent(rng), y1 + extent(rng)};
      ex.scene.detections.push_back(std::move(d));
    }

    ex.qa.question_tokens = std::move(tokens);
    ex.qa.question_category = tmpl.category;
    ex.qa.question_type = tmpl.type;
    std::bernoulli_distribution agrees(config_.annotator_agreement);
    std::vector<std::string> distractor_answers;
    for (const auto& a : tmpl.answers)
      if (a != answer) distractor_answers.push_back(a);
    for (std::size_t i = 0; i < kAnnotatorsPerQuestion; ++i) {
      ex.qa.answers.push_back(agrees(rng) ? answer : pick(distractor_answers, rng));
    }
    ex.qa.nouns = extract_nouns(ex.qa.question_tokens, default_lexicon());
    for (const auto& d : ex.scene.detections) {
      if (std::find(ex.qa.nouns.begin(), ex.qa.nouns.end(), d.category) != ex.qa.nouns.end()) {
        ex.qa.gt_key_object_ids.push_back(d.id);
      }
    }
    return ex;
  }

 private:
  const DataConfig& config_;
  const Prototypes& protos_;
  std::vector<std::string> categories_, colors_, sizes_;
};

void validate(const DataConfig& config) {
  if (config.num_objects < 2) throw ConfigError("num_objects must be at least 2");
  if (config.feature_dim == 0) throw ConfigError("feature_dim must be positive");
  if (!(config.bias > 0.0 && config.bias < 1.0)) throw ConfigError("bias must lie in (0, 1)");
  if (!(config.tail_decay > 0.0 && config.tail_decay <= 1.0)) {
    throw ConfigError("tail_decay must lie in (0, 1]");
  }
  if (!(config.annotator_agreement >= 0.0 && config.annotator_agreement <= 1.0)) {
    throw ConfigError("annotator_agreement must lie in [0, 1]");
  }
  if (!(config.feature_noise >= 0.0) || !(config.prototype_scale > 0.0)) {
    throw ConfigError("feature_noise must be >= 0 and prototype_scale > 0");
  }
}

}  // namespace

std::vector<std::string> default_answer_vocab() {
  std::vector<std::string> vocab = {"yes", "no", "1", "2", "3", "4"};
  for (const auto& c : color_words()) vocab.push_back(c);
  for (const auto& s : size_words()) vocab.push_back(s);
  return vocab;
}

Benchmark generate_benchmark(const DataConfig& config, std::uint64_t seed) {
  validate(config);
  const auto templates = question_templates();
  Rng proto_rng(derive_seed(seed, fnv1a("prototypes")));
  const Prototypes protos = make_prototypes(config, proto_rng);

  Benchmark bench;
  bench.weak_bias = config.bias <= 0.5;
  std::map<std::string, Prior> test_priors;
  for (const auto& t : templates) {
    Rng prior_rng(derive_seed(seed, fnv1a("prior:" + t.type)));
    bench.train_priors[t.type] = make_train_prior(t, config.bias, config.tail_decay, prior_rng);
    test_priors[t.type] = invert_prior(bench.train_priors[t.type]);
  }

  std::vector<double> shares;
  for (const auto& t : templates) shares.push_back(t.share);
  const InstanceBuilder builder(config, protos);

  auto make_split = [&](std::string_view name, std::size_t count,
                        const std::map<std::string, Prior>& priors) {
    DatasetSplit split;
    split.name = std::string(name);
    split.num_objects = config.num_objects;
    split.feature_dim = config.feature_dim;
    split.answer_vocab = default_answer_vocab();
    split.instances.reserve(count);
    const std::uint64_t stream = fnv1a(name);
    for (std::size_t i = 0; i < count; ++i) {
      Rng rng(derive_seed(seed, stream ^ mix64(i)));
      std::discrete_distribution<std::size_t> which(shares.begin(), shares.end());
      const auto& tmpl = templates[which(rng)];
      split.instances.push_back(builder.build(split.name, i, tmpl, priors.at(tmpl.type), rng));
    }
    return split;
  };

  bench.train = make_split(kTrainSplit, config.train_size, bench.train_priors);
  bench.val = make_split(kValSplit, config.val_size, bench.train_priors);
  bench.test = make_split(kTestSplit, config.test_size, test_priors);
  return bench;
}

std::vector<double> soft_targets(std::span<const std::string> answers,
                                 std::span<const std::string> answer_vocab) {
  std::vector<double> counts(answer_vocab.size(), 0.0);
  for (const auto& a : answers) {
    auto it = std::find(answer_vocab.begin(), answer_vocab.end(), a);
    if (it == answer_vocab.end()) {
      throw VocabularyError("answer '" + a + "' is not in the answer vocabulary");
    }
    counts[static_cast<std::size_t>(it - answer_vocab.begin())] += 1.0;
  }
  for (double& c : counts) c = std::min(1.0, c / 3.0);
  return counts;
}

std::string majority_answer(std::span<const std::string> answers) {
  std::string best;
  std::size_t best_count = 0;
  for (const auto& a : answers) {
    const auto c = static_cast<std::size_t>(std::count(answers.begin(), answers.end(), a));
    if (c > best_count) {
      best = a;
      best_count = c;
    }
  }
  return best;
}

}  // namespace attreg::data
