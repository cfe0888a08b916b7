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

#include <cmath>
#include <numeric>
#include <sstream>

#include "attreg/data/lexicon.hpp"
#include "attreg/data/synthdata.hpp"
#include "attreg/diff/ops.hpp"
#include "attreg/error.hpp"
#include "attreg/model/checkpoint.hpp"
#include "attreg/reg/attreg.hpp"
#include "attreg/reg/training.hpp"

using namespace attreg;
using namespace attreg::reg;
using data::Scene;

namespace {

Scene scene_of(const std::vector<std::string>& categories, std::size_t dim = 4) {
  Scene s;
  s.scene_id = "t";
  for (std::size_t i = 0; i < categories.size(); ++i) {
    data::ObjectDetection d;
    d.id = static_cast<int>(i);
    d.category = categories[i];
    d.attributes = {"red", "small"};
    d.feature.assign(dim, 0.1 * static_cast<double>(i + 1));
    d.box = {0.1, 0.1, 0.2, 0.2};
    s.detections.push_back(d);
  }
  return s;
}

std::vector<int> ids_of(const std::vector<ScoredId>& v) {
  std::vector<int> out;
  for (const auto& s : v) out.push_back(s.id);
  return out;
}

data::Benchmark small_bench(std::uint64_t seed) {
  data::DataConfig dc;
  dc.train_size = 96;
  dc.val_size = 16;
  dc.test_size = 16;
  return data::generate_benchmark(dc, seed);
}

}  // namespace

TEST_CASE("identify_key_objects") {
  const auto& emb = data::default_embeddings();
  // grass is an extra noun with its own embedding direction.
  const auto scene = scene_of({"dog", "frisbee", "grass"});
  const std::vector<std::string> frisbee = {"frisbee"};
  CHECK(ids_of(identify_key_objects(scene, frisbee, emb, 0.6, 3)) == std::vector<int>{1});
  CHECK(identify_key_objects(scene, {}, emb, 0.6, 3).empty());

  // sigma = 1 keeps exactly the category matches (>= comparison).
  const auto many = scene_of({"dog", "cat", "dog", "car", "dog"});
  const std::vector<std::string> dog = {"dog"};
  CHECK(ids_of(identify_key_objects(many, dog, emb, 1.0, 5)) == std::vector<int>{0, 2, 4});
  // Cap at M, ties by ascending id.
  CHECK(ids_of(identify_key_objects(many, dog, emb, 1.0, 2)) == std::vector<int>{0, 2});
  // Low threshold admits the same-group cat after the exact matches.
  const auto loose = identify_key_objects(many, dog, emb, 0.3, 5);
  CHECK(ids_of(loose) == std::vector<int>{0, 2, 4, 1});
  CHECK(loose.back().score == doctest::Approx(0.64 / 1.64));
  for (const auto& k : loose) CHECK(k.score >= 0.3);
  // Inactive detections are never keys.
  auto masked = many;
  masked.deactivate(2);
  CHECK(ids_of(identify_key_objects(masked, dog, emb, 1.0, 5)) == std::vector<int>{0, 4});
}

TEST_CASE("locate_ignored counting rule") {
  const auto ten = scene_of(std::vector<std::string>(10, "dog"));
  std::vector<double> alpha = {0.2, 0.01, 0.15, 0.05, 0.1, 0.12, 0.03, 0.14, 0.11, 0.09};
  auto ignored = locate_ignored(ten, alpha, 40);
  std::sort(ignored.begin(), ignored.end());
  CHECK(ignored == std::vector<int>{1, 3, 6, 9});

  const auto eight = scene_of(std::vector<std::string>(8, "dog"));
  const std::vector<double> even(8, 0.125);
  // floor(8 * 0.4) = 3; with ties the highest ids rank last.
  CHECK(locate_ignored(eight, even, 40) == std::vector<int>{5, 6, 7});
  CHECK(locate_ignored(eight, even, 100).size() == 8);
  CHECK(locate_ignored(eight, even, 10).empty());

  // Only active detections count.
  auto partial = eight;
  partial.deactivate(0);
  partial.deactivate(1);
  std::vector<double> a = {0.0, 0.0, 0.3, 0.1, 0.2, 0.15, 0.05, 0.2};
  CHECK(locate_ignored(partial, a, 50) == std::vector<int>{5, 3, 6});

  // Rank-based: a constant shift of every weight leaves the set unchanged.
  std::vector<double> shifted = alpha;
  for (double& v : shifted) v += 3.0;
  CHECK(locate_ignored(ten, shifted, 40) == locate_ignored(ten, alpha, 40));
}

TEST_CASE("curate") {
  auto scene = scene_of(std::vector<std::string>(8, "dog"));
  data::QAInstance qa;
  qa.question_tokens = {"what", "color", "is", "the", "dog"};
  const std::vector<ScoredId> key2 = {{2, 1.0}};
  const std::vector<int> ignored = {5, 7};
  auto r = curate(scene, qa, key2, ignored, 19);
  CHECK_FALSE(r.sample.has_value());
  CHECK(r.report.masked_ids.empty());

  const std::vector<ScoredId> key25 = {{2, 1.0}, {5, 1.0}};
  r = curate(scene, qa, key25, ignored, 19);
  REQUIRE(r.sample.has_value());
  CHECK(r.report.masked_ids == std::vector<int>{5});
  CHECK(r.sample->scene.active_count() == 7);
  CHECK_FALSE(r.sample->scene.detections[5].active);
  CHECK(r.sample->question_tokens == qa.question_tokens);
  CHECK(r.sample->target.size() == 19);
  CHECK(std::accumulate(r.sample->target.begin(), r.sample->target.end(), 0.0) == 0.0);
  // Only the active flag changes.
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(r.sample->scene.detections[i].feature == scene.detections[i].feature);
  }

  // Masking everything is skipped.
  auto two = scene_of({"dog", "dog"});
  const std::vector<ScoredId> both = {{0, 1.0}, {1, 1.0}};
  const std::vector<int> all = {0, 1};
  r = curate(two, qa, both, all, 19);
  CHECK_FALSE(r.sample.has_value());
  CHECK(r.skipped_empty_scene);
  CHECK(r.report.masked_ids == std::vector<int>{0, 1});
}

TEST_CASE("combined_loss") {
  CHECK(combined_loss(1.2, 0.4, 0.5) == doctest::Approx(1.4).epsilon(1e-15));
  CHECK(combined_loss(1.2, 0.4, 0.0) == 1.2);
  const Tensor vqa = Tensor::scalar(0.7);
  CHECK(combined_loss(vqa, Tensor{}, 1.0).item() == 0.7);
  CHECK(combined_loss(vqa, Tensor::scalar(0.3), 0.0).item() == 0.7);

  // A zero target turns the loss into -sum log(1 - p).
  auto bench = small_bench(1);
  const auto m = model::make_model({}, bench.train.answer_vocab, 2);
  const auto& ex = bench.train.instances[0];
  const auto ids = model::encode_tokens(ex.qa.question_tokens, m.question_vocab);
  const auto input = model::scene_input(ex.scene);
  const auto out = model::forward_loss(m, input, ids, Tensor::zeros({1, m.answer_vocab.size()}));
  double oracle = 0.0;
  for (double p : out.output.probs.values()) oracle -= std::log(1.0 - p);
  CHECK(out.loss.item() == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("masked features receive no gradient") {
  auto bench = small_bench(2);
  const auto m = model::make_model({}, bench.train.answer_vocab, 3);
  auto scene = bench.train.instances[0].scene;
  scene.deactivate(3);
  auto input = model::scene_input(scene, true);
  const auto ids = model::encode_tokens(bench.train.instances[0].qa.question_tokens,
                                        m.question_vocab);
  diff::Tape tape;
  auto fl = model::forward_loss(m, input, ids, Tensor::zeros({1, m.answer_vocab.size()}));
  tape.backward(fl.loss);
  const auto g = input.features.grad();
  const std::size_t d = scene.detections[0].feature.size();
  for (std::size_t j = 0; j < d; ++j) CHECK(g[3 * d + j] == 0.0);
  const auto w = fl.output.attention.values();
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("RegConfig validation") {
  RegConfig c;
  CHECK_NOTHROW(c.validate());
  c.sigma = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.top_m = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.ignored_pct = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lambda = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_policy("attreg") == CurationPolicy::kAttReg);
  CHECK_THROWS_AS(parse_policy("bogus"), ConfigError);
}

TEST_CASE("lambda zero reproduces plain fine-tuning bit for bit") {
  auto bench = small_bench(3);
  const auto start = model::make_model({}, bench.train.answer_vocab, 4);
  TrainConfig plain;
  plain.epoch_lrs = {1e-3, 1e-3};
  plain.batch_size = 16;
  plain.seed = 9;
  TrainConfig zero = plain;
  zero.policy = CurationPolicy::kAttReg;
  zero.reg.lambda = 0.0;
  const auto a = train(start, bench.train, plain);
  const auto b = train(start, bench.train, zero);
  CHECK(model::params_hash(a.model.params) == model::params_hash(b.model.params));
  CHECK(b.epochs.back().curated > 0);
  // And lambda > 0 does change the trajectory.
  zero.reg.lambda = 1.0;
  const auto c = train(start, bench.train, zero);
  CHECK(model::params_hash(a.model.params) != model::params_hash(c.model.params));
  // Training never touches the starting model.
  CHECK(model::params_hash(start.params) ==
        model::params_hash(model::make_model({}, bench.train.answer_vocab, 4).params));
}

TEST_CASE("training statistics") {
  auto bench = small_bench(4);
  const auto start = model::make_model({}, bench.train.answer_vocab, 5);
  TrainConfig config;
  config.epoch_lrs = {1e-3, 1e-3, 1e-3};
  config.batch_size = 32;
  config.policy = CurationPolicy::kAttReg;
  config.reg.start_epoch = 1;
  const auto r = train(start, bench.train, config);
  REQUIRE(r.epochs.size() == 4);
  CHECK(r.epochs[0].epoch == 0);
  CHECK(r.epochs[0].mean_ignored_key_count ==
        doctest::Approx(mean_ignored_key_count(start, bench.train, config.reg)));
  CHECK_FALSE(r.epochs[1].regularized);
  CHECK(r.epochs[1].curated == 0);
  CHECK(r.epochs[2].regularized);
  CHECK(r.epochs[3].mean_ignored_key_count ==
        doctest::Approx(mean_ignored_key_count(r.model, bench.train, config.reg)));

  std::ostringstream csv;
  write_epoch_csv(csv, r.epochs);
  const auto text = csv.str();
  CHECK(text.rfind("epoch,mean_ignored_key_count,L_vqa,L_reg", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);

  // Policies that draw random numbers are still deterministic per seed.
  config.policy = CurationPolicy::kRandMask;
  CHECK(model::params_hash(train(start, bench.train, config).model.params) ==
        model::params_hash(train(start, bench.train, config).model.params));
  config.policy = CurationPolicy::kRandImg;
  const auto img = train(start, bench.train, config);
  CHECK(img.epochs[2].curated == bench.train.instances.size());
}

TEST_CASE("ignored-key count boundary cases") {
  auto bench = small_bench(5);
  auto m = model::make_model({}, bench.train.answer_vocab, 6);
  m.config.uniform_attention = true;
  RegConfig all;
  all.sigma = 1.0;
  all.top_m = 8;
  all.ignored_pct = 100;
  double expected = 0.0;
  for (const auto& ex : bench.train.instances) {
    expected += static_cast<double>(std::min<std::size_t>(ex.qa.gt_key_object_ids.size(), 8));
  }
  expected /= static_cast<double>(bench.train.instances.size());
  CHECK(mean_ignored_key_count(m, bench.train, all) == doctest::Approx(expected).epsilon(1e-12));
}
