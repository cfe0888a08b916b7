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

#include <benchmark/benchmark.h>

#include "attreg/data/lexicon.hpp"
#include "attreg/data/synthdata.hpp"
#include "attreg/diff/ops.hpp"
#include "attreg/faith/faitheval.hpp"
#include "attreg/model/model.hpp"
#include "attreg/reg/attreg.hpp"
#include "attreg/reg/training.hpp"

using namespace attreg;

namespace {

const data::Benchmark& shared_bench() {
  static const data::Benchmark b = [] {
    data::DataConfig dc;
    dc.train_size = 256;
    dc.val_size = 64;
    dc.test_size = 64;
    return data::generate_benchmark(dc, 1);
  }();
  return b;
}

model::Model shared_model() {
  return model::make_model({}, shared_bench().train.answer_vocab, 1);
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  const auto m = shared_model();
  const auto& ex = shared_bench().train.instances[0];
  const auto input = model::scene_input(ex.scene);
  const auto ids = model::encode_tokens(ex.qa.question_tokens, m.question_vocab);
  for (auto _ : state) {
    auto out = model::forward(m, input, ids);
    benchmark::DoNotOptimize(out.probs.values().data());
  }
}
BENCHMARK(BM_Forward);

static void BM_ForwardBackward(benchmark::State& state) {
  auto m = shared_model();
  const auto& ex = shared_bench().train.instances[0];
  const auto input = model::scene_input(ex.scene);
  const auto ids = model::encode_tokens(ex.qa.question_tokens, m.question_vocab);
  const auto y = diff::Tensor::row(data::soft_targets(ex.qa.answers, m.answer_vocab));
  for (auto _ : state) {
    diff::Tape tape;
    auto fl = model::forward_loss(m, input, ids, y);
    tape.backward(fl.loss);
    benchmark::DoNotOptimize(fl.loss.item());
  }
}
BENCHMARK(BM_ForwardBackward);

static void BM_TrainEpoch(benchmark::State& state) {
  const auto m = shared_model();
  reg::TrainConfig tc;
  tc.epoch_lrs = {1e-3};
  tc.policy = state.range(0) ? reg::CurationPolicy::kAttReg : reg::CurationPolicy::kNone;
  tc.track_ignored = false;
  for (auto _ : state) {
    auto r = reg::train(m, shared_bench().train, tc);
    benchmark::DoNotOptimize(r.epochs.back().l_vqa);
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<int64_t>(shared_bench().train.instances.size()));
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

static void BM_KeyObjectReport(benchmark::State& state) {
  const auto m = shared_model();
  const auto& ex = shared_bench().train.instances[0];
  const auto out = model::forward(m, ex.scene, ex.qa.question_tokens);
  const std::vector<double> alpha(out.attention.values().begin(), out.attention.values().end());
  const reg::RegConfig rc;
  for (auto _ : state) {
    auto r = reg::key_object_report(ex.scene, ex.qa, alpha, rc, data::default_embeddings());
    benchmark::DoNotOptimize(r.masked_ids.data());
  }
}
BENCHMARK(BM_KeyObjectReport);

static void BM_GenerateBenchmark(benchmark::State& state) {
  data::DataConfig dc;
  dc.train_size = static_cast<std::size_t>(state.range(0));
  dc.val_size = 0;
  dc.test_size = 0;
  for (auto _ : state) {
    auto b = data::generate_benchmark(dc, 3);
    benchmark::DoNotOptimize(b.train.instances.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GenerateBenchmark)->Arg(1000)->Unit(benchmark::kMillisecond);

static void BM_RegionTvdCurve(benchmark::State& state) {
  const auto m = shared_model();
  for (auto _ : state) {
    auto c = faith::region_tvd_curve(m, shared_bench().val, faith::GroundingSource::kAttention);
    benchmark::DoNotOptimize(c.data());
  }
}
BENCHMARK(BM_RegionTvdCurve)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
