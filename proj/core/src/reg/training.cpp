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

#include "attreg/reg/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "attreg/data/synthdata.hpp"
#include "attreg/diff/ops.hpp"
#include "attreg/error.hpp"
#include "attreg/rng.hpp"

namespace attreg::reg {

std::string_view to_string(CurationPolicy p) {
  switch (p) {
    case CurationPolicy::kNone: return "plain";
    case CurationPolicy::kAttReg: return "attreg";
    case CurationPolicy::kRandMask: return "rand_mask";
    case CurationPolicy::kRandImg: return "rand_img";
  }
  return "?";
}

CurationPolicy parse_policy(std::string_view s) {
  if (s == "plain" || s == "none") return CurationPolicy::kNone;
  if (s == "attreg") return CurationPolicy::kAttReg;
  if (s == "rand_mask") return CurationPolicy::kRandMask;
  if (s == "rand_img") return CurationPolicy::kRandImg;
  throw ConfigError("unknown training policy '" + std::string(s) + "'");
}

namespace {

struct Curated {
  data::Scene scene;
  const data::QAInstance* qa;
};

class EpochAccumulator {
 public:
  void add_batch(double l_vqa, double l_reg, bool has_reg) {
    vqa_sum_ += l_vqa;
    ++batches_;
    if (has_reg) {
      reg_sum_ += l_reg;
      ++reg_batches_;
    }
  }
  double l_vqa() const { return batches_ ? vqa_sum_ / batches_ : 0.0; }
  double l_reg() const { return reg_batches_ ? reg_sum_ / reg_batches_ : 0.0; }

 private:
  double vqa_sum_ = 0.0, reg_sum_ = 0.0;
  std::size_t batches_ = 0, reg_batches_ = 0;
};

}  // namespace

TrainResult train(const model::Model& start, const data::DatasetSplit& train_split,
                  const TrainConfig& config, const EpochHook& hook) {
  config.reg.validate();
  if (config.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (train_split.answer_vocab != start.answer_vocab) {
    throw VocabularyError("training split answer vocabulary differs from the model's");
  }
  TrainResult result{model::clone_model(start), {}};
  model::Model& m = result.model;
  // Snapshot for frozen-attention localisation.
  const model::Model frozen =
      config.reg.frozen_attention ? model::clone_model(start) : model::Model{};
  const auto& table = data::default_embeddings();
  const std::size_t n = train_split.instances.size();
  const std::size_t num_answers = m.answer_vocab.size();
  const Tensor zero_target = Tensor::zeros({1, num_answers});

  // Soft targets and token ids do not change across epochs.
  std::vector<Tensor> targets;
  std::vector<std::vector<std::size_t>> token_ids;
  targets.reserve(n);
  token_ids.reserve(n);
  for (const auto& ex : train_split.instances) {
    targets.push_back(Tensor::row(data::soft_targets(ex.qa.answers, m.answer_vocab)));
    token_ids.push_back(model::encode_tokens(ex.qa.question_tokens, m.question_vocab));
  }

  if (config.track_ignored) {
    EpochStats s;
    s.mean_ignored_key_count = mean_ignored_key_count(m, train_split, config.reg);
    result.epochs.push_back(s);
  }

  auto blocks = m.params.blocks();
  diff::AdamState adam;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < config.epoch_lrs.size(); ++epoch) {
    diff::AdamConfig adam_config;
    adam_config.lr = config.epoch_lrs[epoch];
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, fnv1a("shuffle") ^ mix64(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    // Separate stream so the batch order never depends on the policy.
    Rng policy_rng(derive_seed(config.seed, fnv1a("policy") ^ mix64(epoch)));

    const bool regularize =
        config.policy != CurationPolicy::kNone && epoch >= config.reg.start_epoch;
    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.regularized = regularize;
    EpochAccumulator acc;

    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      for (auto& b : blocks) b.zero_grad();
      diff::Tape tape;
      std::vector<Tensor> vqa_losses;
      std::vector<Tensor> reg_losses;
      std::vector<Curated> curated;
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t i = order[k];
        const auto& ex = train_split.instances[i];
        auto fl = model::forward_loss(m, model::scene_input(ex.scene), token_ids[i], targets[i]);
        vqa_losses.push_back(fl.loss);
        if (!regularize) continue;
        switch (config.policy) {
          case CurationPolicy::kAttReg: {
            std::vector<double> alpha;
            if (config.reg.frozen_attention) {
              const auto out = model::forward(frozen, model::scene_input(ex.scene), token_ids[i]);
              alpha.assign(out.attention.values().begin(), out.attention.values().end());
            } else {
              alpha.assign(fl.output.attention.values().begin(),
                           fl.output.attention.values().end());
            }
            const auto keys =
                identify_key_objects(ex.scene, ex.qa.nouns, table, config.reg.sigma,
                                     config.reg.top_m);
            const auto ignored = locate_ignored(ex.scene, alpha, config.reg.ignored_pct);
            auto c = curate(ex.scene, ex.qa, keys, ignored, num_answers);
            if (c.skipped_empty_scene) ++stats.skipped;
            if (c.sample) curated.push_back({std::move(c.sample->scene), &ex.qa});
            break;
          }
          case CurationPolicy::kRandMask: {
            std::vector<int> active_ids;
            for (const auto& d : ex.scene.detections)
              if (d.active) active_ids.push_back(d.id);
            if (active_ids.size() < 2) {
              ++stats.skipped;
              break;
            }
            std::uniform_int_distribution<std::size_t> pick(0, active_ids.size() - 1);
            data::Scene s = ex.scene;
            s.deactivate(active_ids[pick(policy_rng)]);
            curated.push_back({std::move(s), &ex.qa});
            break;
          }
          case CurationPolicy::kRandImg: {
            if (n < 2) break;
            const std::size_t j = rand_img_partner(i, n, policy_rng);
            curated.push_back({train_split.instances[j].scene, &ex.qa});
            break;
          }
          case CurationPolicy::kNone: break;
        }
      }
      for (std::size_t c = 0; c < curated.size(); ++c) {
        const auto ids = model::encode_tokens(curated[c].qa->question_tokens, m.question_vocab);
        reg_losses.push_back(
            model::forward_loss(m, model::scene_input(curated[c].scene), ids, zero_target).loss);
      }
      stats.curated += curated.size();
      const double inv_batch = 1.0 / static_cast<double>(vqa_losses.size());
      const Tensor l_vqa = diff::affine(diff::add_all(vqa_losses), inv_batch, 0.0);
      Tensor l_reg;
      if (!reg_losses.empty()) {
        l_reg = diff::affine(diff::add_all(reg_losses),
                             1.0 / static_cast<double>(reg_losses.size()), 0.0);
      }
      const Tensor loss = combined_loss(l_vqa, l_reg, config.reg.lambda);
      if (!std::isfinite(loss.item())) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch + 1));
      }
      acc.add_batch(l_vqa.item(), l_reg.defined() ? l_reg.item() : 0.0, l_reg.defined());
      tape.backward(loss);
      diff::adam_step(blocks, adam, adam_config);
    }
    stats.l_vqa = acc.l_vqa();
    stats.l_reg = acc.l_reg();
    if (config.track_ignored) {
      stats.mean_ignored_key_count = mean_ignored_key_count(m, train_split, config.reg);
    }
    result.epochs.push_back(stats);
    if (hook) hook(epoch + 1, m);
  }
  return result;
}

std::size_t rand_img_partner(std::size_t i, std::size_t n, Rng& rng) {
  if (n < 2 || i >= n) throw ConfigError("rand_img needs another scene to pair with");
  std::uniform_int_distribution<std::size_t> pick(0, n - 2);
  const std::size_t j = pick(rng);
  return j >= i ? j + 1 : j;
}

TrainResult finetune_with_attreg(const model::Model& pretrained,
                                 const data::DatasetSplit& train_split, const RegConfig& reg,
                                 double lr, std::size_t epochs, std::size_t batch_size,
                                 std::uint64_t seed, const EpochHook& hook) {
  TrainConfig config;
  config.epoch_lrs.assign(epochs, lr);
  config.batch_size = batch_size;
  config.seed = seed;
  config.policy = CurationPolicy::kAttReg;
  config.reg = reg;
  return train(pretrained, train_split, config, hook);
}

void write_epoch_csv(std::ostream& out, const std::vector<EpochStats>& stats) {
  out << "epoch,mean_ignored_key_count,L_vqa,L_reg,curated,skipped\n";
  out.precision(17);
  for (const auto& s : stats) {
    out << s.epoch << ',' << s.mean_ignored_key_count << ',' << s.l_vqa << ',' << s.l_reg << ','
        << s.curated << ',' << s.skipped << '\n';
  }
}

}  // namespace attreg::reg
