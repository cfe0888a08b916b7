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

// attreg command-line tool. Run `attreg --help` for the subcommands.

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "attreg/data/split_io.hpp"
#include "attreg/data/synthdata.hpp"
#include "attreg/error.hpp"
#include "attreg/faith/faitheval.hpp"
#include "attreg/harness/baselines.hpp"
#include "attreg/harness/config.hpp"
#include "attreg/harness/experiment.hpp"
#include "attreg/harness/metrics.hpp"
#include "attreg/model/checkpoint.hpp"
#include "attreg/reg/training.hpp"

namespace fs = std::filesystem;
using namespace attreg;
using json = nlohmann::ordered_json;

namespace {

struct DataOptions {
  std::string config;
  std::string data_dir;
  std::uint64_t seed = 1;
};

void add_data_options(CLI::App* cmd, DataOptions& o) {
  cmd->add_option("--config", o.config, "Experiment config file");
  cmd->add_option("--data", o.data_dir, "Directory written by synth-data (else generated)");
  cmd->add_option("--seed", o.seed, "Seed");
}

harness::ExperimentConfig load_or_default(const std::string& path) {
  return path.empty() ? harness::ExperimentConfig{} : harness::load_config(path);
}

data::Benchmark load_benchmark(const DataOptions& o) {
  if (o.data_dir.empty()) {
    return data::generate_benchmark(load_or_default(o.config).data, o.seed);
  }
  const fs::path dir(o.data_dir);
  data::Benchmark b;
  b.train = data::read_split(dir / "train.jsonl");
  b.val = data::read_split(dir / "val_indomain.jsonl");
  b.test = data::read_split(dir / "test_ood.jsonl");
  return b;
}

const data::DatasetSplit& pick_split(const data::Benchmark& b, const std::string& name) {
  for (const auto* s : {&b.train, &b.val, &b.test})
    if (s->name == name) return *s;
  throw ConfigError("unknown split '" + name + "' (train, val_indomain, test_ood)");
}

json to_json(const harness::MetricsRecord& m) {
  json j{{"split", m.split}, {"overall", m.overall}, {"n", m.n}};
  for (auto c : data::kAllCategories) {
    j[std::string(data::to_string(c))] = {{"accuracy", m.category(c).accuracy},
                                          {"n", m.category(c).n}};
  }
  return j;
}

void write_csv(const std::string& path, const std::vector<reg::EpochStats>& epochs) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  reg::write_epoch_csv(out, epochs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention-regularized VQA training on a synthetic benchmark"};
  app.require_subcommand(1);

  // synth-data
  DataOptions synth;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth-data", "Generate train/val_indomain/test_ood splits");
  synth_cmd->add_option("--config", synth.config, "Experiment config file");
  synth_cmd->add_option("--seed", synth.seed, "Seed");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->callback([&] {
    const auto b = data::generate_benchmark(load_or_default(synth.config).data, synth.seed);
    fs::create_directories(synth_out);
    for (const auto* s : {&b.train, &b.val, &b.test}) {
      data::write_split(fs::path(synth_out) / (s->name + ".jsonl"), *s);
      spdlog::info("{}: {} instances", s->name, s->instances.size());
    }
    if (b.weak_bias) spdlog::warn("bias <= 0.5: the splits carry no usable prior shift");
  });

  // pretrain
  DataOptions pre;
  std::string pre_out, pre_csv;
  auto* pre_cmd = app.add_subcommand("pretrain", "Train with the plain VQA loss, select on val");
  add_data_options(pre_cmd, pre);
  pre_cmd->add_option("--checkpoint-out", pre_out, "Checkpoint path")->required();
  pre_cmd->add_option("--epoch-csv", pre_csv, "Per-epoch statistics CSV");
  pre_cmd->callback([&] {
    const auto config = load_or_default(pre.config);
    const auto b = load_benchmark(pre);
    const auto r = harness::pretrain(harness::initial_model(config, b, pre.seed), b,
                                     config.optimizer, pre.seed);
    for (std::size_t e = 0; e < r.val_by_epoch.size(); ++e) {
      spdlog::info("epoch {} val_indomain {:.4f}", e + 1, r.val_by_epoch[e].overall);
    }
    spdlog::info("best epoch {}", r.best_epoch);
    model::save_checkpoint(fs::path(pre_out), r.model);
    write_csv(pre_csv, r.epochs);
  });

  // finetune
  DataOptions ft;
  std::string ft_in, ft_out, ft_csv, ft_policy;
  bool ft_attreg = false;
  std::optional<double> lr;
  std::optional<std::size_t> epochs, batch;
  reg::RegConfig rc = harness::ExperimentConfig{}.reg;
  auto* ft_cmd = app.add_subcommand("finetune", "Fine-tune a checkpoint (plain or regularized)");
  add_data_options(ft_cmd, ft);
  ft_cmd->add_option("--checkpoint-in", ft_in, "Starting checkpoint")->required();
  ft_cmd->add_option("--checkpoint-out", ft_out, "Output checkpoint")->required();
  ft_cmd->add_flag("--attreg", ft_attreg, "Regularize with curated samples");
  ft_cmd->add_option("--policy", ft_policy, "plain, attreg, rand_mask or rand_img");
  ft_cmd->add_option("--sigma", rc.sigma, "Key-object similarity threshold");
  ft_cmd->add_option("--top-m", rc.top_m, "Maximum key objects");
  ft_cmd->add_option("--ignored-pct", rc.ignored_pct, "Bottom N% of attention counted as ignored");
  ft_cmd->add_option("--lambda", rc.lambda, "Weight of the regularization loss");
  ft_cmd->add_option("--start-epoch", rc.start_epoch, "First regularized epoch (0-based)");
  ft_cmd->add_flag("--frozen-attention", rc.frozen_attention,
                   "Locate ignored objects with the starting model");
  ft_cmd->add_option("--lr", lr, "Learning rate");
  ft_cmd->add_option("--epochs", epochs, "Epochs");
  ft_cmd->add_option("--batch-size", batch, "Batch size");
  ft_cmd->add_option("--epoch-csv", ft_csv, "Per-epoch statistics CSV");
  ft_cmd->callback([&] {
    const auto config = load_or_default(ft.config);
    const auto b = load_benchmark(ft);
    const auto start = model::load_checkpoint(fs::path(ft_in));
    model::require_answer_vocab(start, b.train.answer_vocab);
    reg::TrainConfig tc;
    tc.epoch_lrs.assign(epochs.value_or(config.optimizer.finetune_epochs),
                        lr.value_or(config.optimizer.lr_finetune));
    tc.batch_size = batch.value_or(config.optimizer.batch_size);
    tc.seed = ft.seed;
    tc.policy = ft_attreg ? reg::CurationPolicy::kAttReg
                          : reg::parse_policy(ft_policy.empty() ? "plain" : ft_policy);
    tc.reg = rc;
    tc.reg.validate();
    const auto r = reg::train(start, b.train, tc, [&](std::size_t e, const model::Model& m) {
      spdlog::info("epoch {} val_indomain {:.4f}", e, harness::evaluate(m, b.val).overall);
    });
    for (const auto& s : r.epochs) {
      spdlog::info("epoch {} ignored-key count {:.4f} curated {}", s.epoch,
                   s.mean_ignored_key_count, s.curated);
    }
    model::save_checkpoint(fs::path(ft_out), r.model);
    write_csv(ft_csv, r.epochs);
  });

  // eval
  DataOptions ev;
  std::string ev_ckpt, ev_split = "all";
  auto* ev_cmd = app.add_subcommand("eval", "Score a checkpoint on a split");
  add_data_options(ev_cmd, ev);
  ev_cmd->add_option("--checkpoint", ev_ckpt, "Checkpoint")->required();
  ev_cmd->add_option("--split", ev_split, "train, val_indomain, test_ood or all");
  ev_cmd->callback([&] {
    const auto b = load_benchmark(ev);
    const auto m = model::load_checkpoint(fs::path(ev_ckpt));
    json out = json::array();
    for (const auto* s : {&b.train, &b.val, &b.test}) {
      if (ev_split == "all" || ev_split == s->name) out.push_back(to_json(harness::evaluate(m, *s)));
    }
    if (out.empty()) throw ConfigError("unknown split '" + ev_split + "'");
    std::cout << out.dump(2) << "\n";
  });

  // baseline
  DataOptions bl;
  std::string bl_policy, bl_split = "test_ood", bl_ckpt;
  auto* bl_cmd = app.add_subcommand("baseline", "Score a prediction baseline");
  add_data_options(bl_cmd, bl);
  bl_cmd->add_option("--policy", bl_policy,
                     "random_predictions, random_predictions_inverted or top_ans_masked")
      ->required();
  bl_cmd->add_option("--split", bl_split, "Split to score");
  bl_cmd->add_option("--checkpoint", bl_ckpt, "Model for top_ans_masked");
  bl_cmd->callback([&] {
    const auto b = load_benchmark(bl);
    std::optional<model::Model> m;
    if (!bl_ckpt.empty()) m = model::load_checkpoint(fs::path(bl_ckpt));
    const auto r = harness::run_baseline(harness::parse_baseline(bl_policy), b.train,
                                         pick_split(b, bl_split), bl.seed, m ? &*m : nullptr);
    std::cout << to_json(r).dump(2) << "\n";
  });

  // faitheval
  DataOptions fe;
  std::string fe_ckpt, fe_split = "val_indomain", fe_source = "attention", fe_mode = "keep";
  auto* fe_cmd = app.add_subcommand("faitheval", "Faithfulness probes for a checkpoint");
  add_data_options(fe_cmd, fe);
  fe_cmd->add_option("--checkpoint", fe_ckpt, "Checkpoint")->required();
  fe_cmd->add_option("--split", fe_split, "Split");
  fe_cmd->add_option("--source", fe_source, "attention, gradient or uniform");
  fe_cmd->add_option("--mode", fe_mode, "keep, tvd or ignored");
  fe_cmd->callback([&] {
    const auto b = load_benchmark(fe);
    const auto m = model::load_checkpoint(fs::path(fe_ckpt));
    const auto& split = pick_split(b, fe_split);
    const auto source = faith::parse_source(fe_source);
    json out;
    if (fe_mode == "keep") {
      for (double lo = 0; lo < 100; lo += 20) {
        const auto r = faith::keep_interval_eval(m, split, lo, lo + 20, source, fe.seed);
        out.push_back({{"lo", r.lo}, {"hi", r.hi}, {"accuracy", r.accuracy},
                       {"mean_kept", r.mean_kept}, {"n", r.n}});
      }
    } else if (fe_mode == "tvd") {
      const auto curve = faith::region_tvd_curve(m, split, source, fe.seed);
      for (const auto& r : curve) {
        out["curve"].push_back({{"rank", r.rank}, {"mean_tvd", r.mean_tvd}, {"n", r.n}});
      }
      out["spearman"] = faith::curve_correlation(curve);
    } else if (fe_mode == "ignored") {
      out["mean_ignored_key_count"] =
          faith::ignored_key_count(m, split, load_or_default(fe.config).reg);
    } else {
      throw ConfigError("unknown mode '" + fe_mode + "' (keep, tvd, ignored)");
    }
    std::cout << out.dump(2) << "\n";
  });

  // report
  std::vector<std::string> rp_in;
  std::string rp_out = "table.csv";
  auto* rp_cmd = app.add_subcommand("report", "Merge metrics.json files into one table");
  rp_cmd->add_option("--in", rp_in, "metrics.json files")->required();
  rp_cmd->add_option("--out", rp_out, "CSV output");
  rp_cmd->callback([&] {
    std::vector<fs::path> paths(rp_in.begin(), rp_in.end());
    std::cout << harness::report(paths, rp_out);
  });

  // run
  std::string run_config, run_out;
  std::vector<std::uint64_t> run_seeds;
  std::optional<std::size_t> run_jobs;
  auto* run_cmd = app.add_subcommand("run", "Full experiment: pretrain, fine-tune, evaluate");
  run_cmd->add_option("--config", run_config, "Experiment config file");
  run_cmd->add_option("--out", run_out, "Results directory")->required();
  run_cmd->add_option("--seeds", run_seeds, "Override the configured seeds");
  run_cmd->add_option("--jobs", run_jobs, "Parallel seeds");
  run_cmd->callback([&] {
    auto config = load_or_default(run_config);
    if (!run_seeds.empty()) config.seeds = run_seeds;
    if (run_jobs) config.jobs = *run_jobs;
    const auto r = harness::run_experiment(config, run_out);
    for (const auto& s : r.seeds) {
      if (s.failed_stage) {
        spdlog::error("seed {} failed in {}: {}", s.seed, *s.failed_stage, *s.error);
        continue;
      }
      for (const auto& run : s.runs) {
        spdlog::info("seed {} {:<18} val {:.4f} ood {:.4f}", s.seed, run.name,
                     run.splits.at("val_indomain").overall, run.splits.at("test_ood").overall);
      }
    }
    if (auto d = harness::median_delta(r, "attreg", "plain", "test_ood")) {
      spdlog::info("median OOD delta attreg - plain: {:+.4f}", *d);
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const attreg::Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
