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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "attreg/data/lexicon.hpp"
#include "attreg/data/split_io.hpp"
#include "attreg/data/synthdata.hpp"
#include "attreg/error.hpp"

using namespace attreg;
using namespace attreg::data;

namespace {

DataConfig small_config() {
  DataConfig c;
  c.train_size = 600;
  c.val_size = 100;
  c.test_size = 200;
  return c;
}

std::string serialize(const DatasetSplit& split) {
  std::ostringstream out;
  write_split(out, split);
  return out.str();
}

// Mode of each question type's scene-true answers.
std::map<std::string, std::map<std::string, int>> histogram_by(
    const DatasetSplit& split, bool by_category) {
  std::map<std::string, std::map<std::string, int>> h;
  for (const auto& ex : split.instances) {
    const std::string key =
        by_category ? std::string(to_string(ex.qa.question_category)) : ex.qa.question_type;
    ++h[key][majority_answer(ex.qa.answers)];
  }
  return h;
}

std::string argmax(const std::map<std::string, int>& h) {
  return std::max_element(h.begin(), h.end(),
                          [](const auto& a, const auto& b) { return a.second < b.second; })
      ->first;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  const auto a = generate_benchmark(small_config(), 7);
  const auto b = generate_benchmark(small_config(), 7);
  CHECK(serialize(a.train) == serialize(b.train));
  CHECK(serialize(a.val) == serialize(b.val));
  CHECK(serialize(a.test) == serialize(b.test));
  const auto c = generate_benchmark(small_config(), 8);
  CHECK(serialize(a.train) != serialize(c.train));
}

TEST_CASE("instances are independent of split size") {
  // Per-instance substreams: a prefix of a larger split equals the smaller split.
  auto big = small_config();
  big.train_size = 900;
  const auto a = generate_benchmark(small_config(), 3);
  const auto b = generate_benchmark(big, 3);
  for (std::size_t i = 0; i < a.train.instances.size(); ++i) {
    CHECK(a.train.instances[i] == b.train.instances[i]);
  }
}

TEST_CASE("generated instances satisfy the structural invariants") {
  const auto bench = generate_benchmark(small_config(), 1);
  const auto& lexicon = default_lexicon();
  for (const auto* split : {&bench.train, &bench.val, &bench.test}) {
    CHECK(split->answer_vocab == bench.train.answer_vocab);
    for (const auto& ex : split->instances) {
      REQUIRE(ex.qa.answers.size() == kAnnotatorsPerQuestion);
      for (const auto& a : ex.qa.answers) CHECK_NOTHROW(split->answer_index(a));
      CHECK(ex.qa.question_tokens.size() <= kMaxQuestionLength);
      REQUIRE(ex.scene.detections.size() == 8);
      std::vector<int> expected_keys;
      for (std::size_t i = 0; i < ex.scene.detections.size(); ++i) {
        const auto& d = ex.scene.detections[i];
        CHECK(d.id == static_cast<int>(i));
        CHECK(d.feature.size() == 32);
        CHECK(std::all_of(d.feature.begin(), d.feature.end(),
                          [](double v) { return std::isfinite(v); }));
        CHECK(d.box[0] < d.box[2]);
        CHECK(d.box[1] < d.box[3]);
        CHECK(d.box[0] >= 0.0);
        CHECK(d.box[3] <= 1.0);
        if (std::find(ex.qa.nouns.begin(), ex.qa.nouns.end(), d.category) != ex.qa.nouns.end()) {
          expected_keys.push_back(d.id);
        }
      }
      CHECK(ex.qa.gt_key_object_ids == expected_keys);
      CHECK(ex.qa.nouns == extract_nouns(ex.qa.question_tokens, lexicon));
    }
  }
}

TEST_CASE("train priors are biased toward one answer per question type") {
  // With b = 0.9 the scene-true answer of a question type follows a binomial
  // with p = 0.9; over n >= 150 draws, 85% is more than 3 standard errors below.
  auto config = small_config();
  config.train_size = 2000;
  const auto bench = generate_benchmark(config, 21);
  const auto h = histogram_by(bench.train, false);
  const auto& color = h.at("what color");
  int total = 0;
  for (const auto& [a, n] : color) total += n;
  REQUIRE(total >= 150);
  CHECK(static_cast<double>(color.at(argmax(color))) / total >= 0.85);
}

TEST_CASE("modal answers flip between train and OOD test") {
  for (double bias : {0.7, 0.8, 0.9}) {
    for (std::uint64_t seed : {1, 2, 3}) {
      auto config = small_config();
      config.bias = bias;
      config.train_size = 1500;
      config.test_size = 1500;
      const auto bench = generate_benchmark(config, seed);
      const auto train = histogram_by(bench.train, true);
      const auto test = histogram_by(bench.test, true);
      for (const auto& [category, hist] : train) {
        CAPTURE(category);
        CAPTURE(bias);
        CHECK(argmax(hist) != argmax(test.at(category)));
      }
    }
  }
}

TEST_CASE("key objects follow the noun rule on a hand-built question") {
  const auto bench = generate_benchmark(small_config(), 4);
  bool seen = false;
  for (const auto& ex : bench.train.instances) {
    if (ex.qa.question_type != "what color") continue;
    const auto& noun = ex.qa.question_tokens.back();
    const auto it = std::find_if(ex.scene.detections.begin(), ex.scene.detections.end(),
                                 [&](const auto& d) { return d.category == noun; });
    REQUIRE(it != ex.scene.detections.end());
    CHECK(ex.qa.gt_key_object_ids == std::vector<int>{it->id});
    CHECK(it->attributes[0] == majority_answer(ex.qa.answers));
    seen = true;
  }
  CHECK(seen);
}

TEST_CASE("configuration errors and warnings") {
  auto config = small_config();
  config.num_objects = 1;
  CHECK_THROWS_AS(generate_benchmark(config, 1), ConfigError);

  config = small_config();
  config.bias = 0.5;
  config.train_size = 50;
  const auto bench = generate_benchmark(config, 1);
  CHECK(bench.weak_bias);
  CHECK_FALSE(generate_benchmark(small_config(), 1).weak_bias);

  config = small_config();
  config.num_objects = 2;
  config.train_size = 200;
  for (const auto& ex : generate_benchmark(config, 2).train.instances) {
    CHECK(ex.scene.detections.size() == 2);
  }
}

TEST_CASE("soft_targets") {
  const auto vocab = default_answer_vocab();
  const auto idx = [&](const std::string& a) {
    return static_cast<std::size_t>(std::find(vocab.begin(), vocab.end(), a) - vocab.begin());
  };
  std::vector<std::string> reds(10, "red");
  auto y = soft_targets(reds, vocab);
  CHECK(y[idx("red")] == 1.0);
  CHECK(y[idx("green")] == 0.0);

  std::vector<std::string> mixed = {"red", "red", "blue", "blue", "blue",
                                    "blue", "blue", "blue", "blue", "blue"};
  y = soft_targets(mixed, vocab);
  CHECK(y[idx("red")] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(y[idx("blue")] == 1.0);
  CHECK(y[idx("green")] == 0.0);
  for (double v : y) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  mixed[3] = "teal";
  try {
    soft_targets(mixed, vocab);
    FAIL("expected VocabularyError");
  } catch (const VocabularyError& e) {
    CHECK(std::string(e.what()).find("teal") != std::string::npos);
  }
}

TEST_CASE("extract_nouns") {
  const auto& lex = default_lexicon();
  using V = std::vector<std::string>;
  CHECK(extract_nouns(V{"what", "color", "is", "the", "ball"}, lex) == V{"ball"});
  CHECK(extract_nouns(V{"is", "there", "a", "dog", "near", "the", "frisbee"}, lex) ==
        V{"dog", "frisbee"});
  CHECK(extract_nouns(V{}, lex).empty());
  CHECK(extract_nouns(V{"dog", "zebra", "dog"}, lex) == V{"dog"});
}

TEST_CASE("embedding table similarities") {
  const auto& emb = default_embeddings();
  CHECK(emb.cosine("dog", "dog") == doctest::Approx(1.0));
  CHECK(emb.cosine("dog", "cat") == doctest::Approx(0.64 / 1.64));
  CHECK(emb.cosine("dog", "car") == 0.0);
  CHECK(emb.cosine("dog", "unicorn") == 0.0);
}

TEST_CASE("split round trip") {
  const auto bench = generate_benchmark(small_config(), 5);
  std::stringstream buffer;
  write_split(buffer, bench.val);
  const auto back = read_split(buffer);
  CHECK(back == bench.val);

  DatasetSplit empty;
  empty.name = "train";
  empty.num_objects = 8;
  empty.feature_dim = 32;
  empty.answer_vocab = default_answer_vocab();
  const std::string text = serialize(empty);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  std::istringstream in(text);
  CHECK(read_split(in) == empty);
}

TEST_CASE("malformed split files report the offending line") {
  const auto bench = generate_benchmark(small_config(), 5);
  const std::string text = serialize(bench.val);

  auto error_of = [](const std::string& s) -> std::string {
    std::istringstream in(s);
    try {
      read_split(in);
    } catch (const FormatError& e) {
      return e.what();
    }
    return "";
  };

  // Cut in the middle of the fourth record (line 5).
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) pos = text.find('\n', pos) + 1;
  const std::string cut = text.substr(0, pos + 40);
  CHECK(error_of(cut).rfind("line 5:", 0) == 0);

  // Cut exactly at a record boundary: caught by the header count.
  const std::string whole_lines = text.substr(0, pos);
  CHECK(error_of(whole_lines).find("truncated") != std::string::npos);

  CHECK(error_of("").rfind("line 1:", 0) == 0);
  CHECK(error_of("{not json}\n").rfind("line 1:", 0) == 0);
}
