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

#include "attreg/data/synthdata.hpp"
#include "attreg/diff/adam.hpp"
#include "attreg/diff/ops.hpp"
#include "attreg/error.hpp"
#include "attreg/model/checkpoint.hpp"
#include "attreg/model/model.hpp"
#include "gradcheck.hpp"

using namespace attreg;
using namespace attreg::model;
using diff::Shape;

namespace {

ModelConfig tiny_dims() {
  ModelConfig c;
  c.word_dim = 4;
  c.question_dim = 5;
  c.hidden_dim = 6;
  c.feature_dim = 3;
  return c;
}

data::Scene random_scene(std::size_t k, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  data::Scene s;
  s.scene_id = "s";
  for (std::size_t i = 0; i < k; ++i) {
    data::ObjectDetection det;
    det.id = static_cast<int>(i);
    det.category = "dog";
    det.attributes = {"red", "small"};
    det.feature.resize(d);
    for (double& v : det.feature) v = n(rng);
    det.box = {0.0, 0.0, 0.5, 0.5};
    s.detections.push_back(det);
  }
  return s;
}

std::vector<double> vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

// Plain-loop forward pass used as an oracle for the tape implementation.
namespace ref {

using M = std::vector<double>;

M matmul(const M& a, const Tensor& w, std::size_t rows) {
  const std::size_t k = w.shape().rows, n = w.shape().cols;
  M out(rows * n, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += a[i * k + p] * w(p, j);
  return out;
}
double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

M question(const Model& m, const std::vector<std::size_t>& ids) {
  const auto& p = m.params;
  const std::size_t dq = m.config.question_dim, dw = m.config.word_dim;
  M h(dq, 0.0);
  for (std::size_t t = 0; t < std::min<std::size_t>(ids.size(), 14); ++t) {
    M x(dw);
    for (std::size_t j = 0; j < dw; ++j) x[j] = p.word_embeddings(ids[t], j);
    const M xz = matmul(x, p.gru_wz, 1), xr = matmul(x, p.gru_wr, 1), xn = matmul(x, p.gru_wn, 1);
    const M hz = matmul(h, p.gru_uz, 1), hr = matmul(h, p.gru_ur, 1), hn = matmul(h, p.gru_un, 1);
    M next(dq);
    for (std::size_t j = 0; j < dq; ++j) {
      const double z = sig(xz[j] + p.gru_bz(0, j) + hz[j]);
      const double r = sig(xr[j] + p.gru_br(0, j) + hr[j]);
      const double n = std::tanh(xn[j] + p.gru_bn(0, j) + r * (hn[j] + p.gru_bhn(0, j)));
      next[j] = (1.0 - z) * n + z * h[j];
    }
    h = next;
  }
  return h;
}

M probs(const Model& m, const data::Scene& s, const std::vector<std::size_t>& ids) {
  const auto& p = m.params;
  const std::size_t k = s.detections.size(), dv = m.config.feature_dim, dh = m.config.hidden_dim;
  const M q = question(m, ids);
  M score(k);
  for (std::size_t i = 0; i < k; ++i) {
    M joint = s.detections[i].feature;
    joint.insert(joint.end(), q.begin(), q.end());
    const M hid = matmul(joint, p.attn_w, 1);
    double acc = 0.0;
    for (std::size_t j = 0; j < dh; ++j) acc += std::tanh(hid[j] + p.attn_b(0, j)) * p.attn_vector(j, 0);
    score[i] = acc;
  }
  M alpha(k, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    if (s.detections[i].active) z += alpha[i] = std::exp(score[i]);
  M v(dv, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < dv; ++j) v[j] += alpha[i] / z * s.detections[i].feature[j];
  M pv = matmul(v, p.v_proj_w, 1), pq = matmul(q, p.q_proj_w, 1), joint(dh);
  for (std::size_t j = 0; j < dh; ++j)
    joint[j] = std::max(0.0, pv[j] + p.v_proj_b(0, j)) * std::max(0.0, pq[j] + p.q_proj_b(0, j));
  M h1 = matmul(joint, p.cls_w1, 1);
  for (std::size_t j = 0; j < h1.size(); ++j) h1[j] = std::max(0.0, h1[j] + p.cls_b1(0, j));
  M out = matmul(h1, p.cls_w2, 1);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = sig(out[j] + p.cls_b2(0, j));
  return out;
}

}  // namespace ref

Model tiny_model(std::uint64_t seed, std::size_t answers = 5) {
  std::vector<std::string> vocab;
  for (std::size_t i = 0; i < answers; ++i) vocab.push_back("a" + std::to_string(i));
  return make_model(tiny_dims(), vocab, seed);
}

std::vector<std::size_t> some_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = (i * 7 + 3) % 20;
  return ids;
}

}  // namespace

TEST_CASE("initialisation is deterministic per seed") {
  const auto a = tiny_model(3), b = tiny_model(3), c = tiny_model(4);
  CHECK(params_hash(a.params) == params_hash(b.params));
  CHECK(params_hash(a.params) != params_hash(c.params));
  for (const auto& blk : a.params.blocks()) {
    CHECK_FALSE(blk.name().empty());
    CHECK(blk.requires_grad());
  }
}

TEST_CASE("forward matches a plain-loop reference") {
  std::mt19937_64 rng(11);
  const auto m = tiny_model(1);
  for (int trial = 0; trial < 5; ++trial) {
    auto scene = random_scene(4, 3, rng);
    if (trial % 2) scene.deactivate(1);
    const auto ids = some_ids(3 + trial * 3);
    const auto got = vec(forward(m, scene_input(scene), ids).probs);
    const auto want = ref::probs(m, scene, ids);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("question encoder") {
  const auto m = tiny_model(2);
  const auto empty = vec(encode_question(m, {}));
  CHECK(std::all_of(empty.begin(), empty.end(), [](double v) { return v == 0.0; }));
  const auto ids = some_ids(20);
  const std::vector<std::size_t> first14(ids.begin(), ids.begin() + 14);
  CHECK(vec(encode_question(m, ids)) == vec(encode_question(m, first14)));
  const std::vector<std::size_t> first13(ids.begin(), ids.begin() + 13);
  CHECK(vec(encode_question(m, ids)) != vec(encode_question(m, first13)));

  const std::vector<std::string> bad = {"what", "xylophone"};
  CHECK_THROWS_AS(encode_tokens(bad, m.question_vocab), VocabularyError);
}

TEST_CASE("attention weights") {
  std::mt19937_64 rng(5);
  const auto m = tiny_model(3);
  const auto q = encode_question(m, some_ids(4));

  // Identical detections get identical weights.
  auto scene = random_scene(4, 3, rng);
  for (auto& d : scene.detections) d.feature = scene.detections[0].feature;
  auto w = vec(attend(m, scene_input(scene), q).weights);
  for (double a : w) CHECK(a == doctest::Approx(0.25).epsilon(1e-14));

  scene = random_scene(5, 3, rng);
  scene.deactivate(2);
  auto input = scene_input(scene, true);
  diff::Tape tape;
  auto att = attend(m, input, q);
  w = vec(att.weights);
  CHECK(w[2] == 0.0);
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  auto out = predict(m, fuse(input, att.weights), q);
  tape.backward(diff::sum(out.logits));
  const auto g = input.features.grad();
  for (std::size_t j = 0; j < 3; ++j) CHECK(g[2 * 3 + j] == 0.0);

  data::Scene none = random_scene(2, 3, rng);
  none.deactivate(0);
  none.deactivate(1);
  CHECK_THROWS_AS(attend(m, scene_input(none), q), ConfigError);
}

TEST_CASE("uniform attention switch") {
  std::mt19937_64 rng(6);
  auto m = tiny_model(3);
  m.config.uniform_attention = true;
  auto scene = random_scene(4, 3, rng);
  scene.deactivate(3);
  const auto w = vec(forward(m, scene_input(scene), some_ids(5)).attention);
  CHECK(w == std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0});
}

TEST_CASE("fuse") {
  const Tensor rows = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
  SceneInput in{rows, {true, true, true}};
  CHECK(vec(fuse(in, Tensor::row({0, 1, 0}))) == std::vector<double>{3, 4});
  const auto mid = vec(fuse(in, Tensor::row({0.5, 0, 0.5})));
  CHECK(mid == std::vector<double>{3, 4});
  // A zero-weight row does not influence the result.
  const Tensor changed = Tensor::from({3, 2}, {1, 2, 99, -99, 5, 6});
  CHECK(vec(fuse(SceneInput{changed, {true, true, true}}, Tensor::row({0.5, 0, 0.5}))) == mid);
}

TEST_CASE("predictor with zero weights") {
  std::mt19937_64 rng(7);
  std::vector<std::string> vocab;
  for (int i = 0; i < 20; ++i) vocab.push_back("a" + std::to_string(i));
  Model m = make_model(tiny_dims(), vocab, 1);
  m.params = zero_params(m.config);
  const auto scene = random_scene(3, 3, rng);
  const auto out = forward(m, scene_input(scene), some_ids(4));
  for (double p : out.probs.values()) CHECK(p == 0.5);
  const auto loss = forward_loss(m, scene_input(scene), some_ids(4),
                                 Tensor::zeros({1, 20})).loss.item();
  CHECK(loss == doctest::Approx(20.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("probabilities stay inside (0, 1)") {
  std::mt19937_64 rng(8);
  const auto m = tiny_model(9);
  for (int i = 0; i < 20; ++i) {
    const auto out = forward(m, scene_input(random_scene(6, 3, rng)), some_ids(1 + i % 10));
    for (double p : out.probs.values()) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }
}

TEST_CASE("full-model gradients match finite differences") {
  std::mt19937_64 rng(12);
  auto m = tiny_model(4);
  auto scene = random_scene(4, 3, rng);
  scene.deactivate(0);
  const auto input = scene_input(scene);
  const auto ids = some_ids(5);
  const Tensor y = Tensor::row({1.0, 0.0, 0.3, 0.0, 0.6});
  const auto result =
      testing::check_gradients([&] { return forward_loss(m, input, ids, y).loss; },
                               m.params.blocks());
  CHECK(result.blocks == 22);
  CHECK(result.max_rel_error < 1e-4);
}

TEST_CASE("training reduces the loss") {
  data::DataConfig dc;
  dc.train_size = 20;
  dc.val_size = 1;
  dc.test_size = 1;
  const auto bench = data::generate_benchmark(dc, 3);
  ModelConfig dims;
  auto m = make_model(dims, bench.train.answer_vocab, 1);
  auto total = [&] {
    double s = 0.0;
    for (const auto& ex : bench.train.instances) s += vqa_forward_loss(m, ex.scene, ex.qa).loss.item();
    return s;
  };
  const double before = total();
  diff::AdamState state;
  diff::AdamConfig ac;
  auto blocks = m.params.blocks();
  for (int step = 0; step < 50; ++step) {
    for (auto& b : blocks) b.zero_grad();
    diff::Tape tape;
    std::vector<Tensor> losses;
    for (const auto& ex : bench.train.instances) losses.push_back(vqa_forward_loss(m, ex.scene, ex.qa).loss);
    tape.backward(diff::affine(diff::add_all(losses), 1.0 / losses.size(), 0.0));
    diff::adam_step(blocks, state, ac);
  }
  CHECK(total() < 0.5 * before);
}

TEST_CASE("permuting detections permutes attention and keeps the prediction") {
  std::mt19937_64 rng(13);
  const auto m = tiny_model(5);
  auto scene = random_scene(5, 3, rng);
  const auto ids = some_ids(6);
  const auto a = forward(m, scene_input(scene), ids);
  auto permuted = scene;
  std::reverse(permuted.detections.begin(), permuted.detections.end());
  const auto b = forward(m, scene_input(permuted), ids);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a.attention(0, i) == doctest::Approx(b.attention(0, 4 - i)).epsilon(1e-13));
  }
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(a.probs(0, j) == doctest::Approx(b.probs(0, j)).epsilon(1e-12));
  }
}

TEST_CASE("checkpoint round trip") {
  const auto m = tiny_model(6);
  std::stringstream buf;
  save_checkpoint(buf, m);
  const auto back = load_checkpoint(buf);
  CHECK(back.config == m.config);
  CHECK(back.answer_vocab == m.answer_vocab);
  CHECK(back.question_vocab == m.question_vocab);
  CHECK(params_hash(back.params) == params_hash(m.params));

  CHECK_NOTHROW(require_answer_vocab(back, m.answer_vocab));
  CHECK_THROWS_AS(require_answer_vocab(back, {"yes", "no"}), VocabularyError);

  std::string text;
  {
    std::stringstream again;
    save_checkpoint(again, m);
    text = again.str();
  }
  std::istringstream cut(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(cut), FormatError);
  const auto pos = text.find("\"num_answers\":5");
  REQUIRE(pos != std::string::npos);
  std::string tampered = text;
  tampered.replace(pos, 15, "\"num_answers\":6");
  std::istringstream bad(tampered);
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
}
