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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "attreg/data/synthdata.hpp"
#include "attreg/faith/faitheval.hpp"
#include "attreg/harness/config.hpp"
#include "attreg/harness/metrics.hpp"
#include "attreg/model/model.hpp"
#include "attreg/reg/training.hpp"

namespace attreg::harness {

struct PretrainResult {
  model::Model model;  // best epoch on val_indomain
  std::size_t best_epoch = 0;
  std::vector<MetricsRecord> val_by_epoch;
  std::vector<reg::EpochStats> epochs;
};

/// Plain-loss training from `start`, keeping the epoch with the best
/// val_indomain accuracy (earliest on ties). Never looks at test_ood.
PretrainResult pretrain(const model::Model& start, const data::Benchmark& benchmark,
                        const OptimizerConfig& optimizer, std::uint64_t seed);

/// Fresh model sized for `benchmark` (feature_dim taken from the data).
model::Model initial_model(const ExperimentConfig& config, const data::Benchmark& benchmark,
                           std::uint64_t seed, bool uniform_attention = false);

struct RunRecord {
  std::string name;  // plain, attreg, lambda=0.5, ...
  std::map<std::string, MetricsRecord> splits;  // keyed by split name
  std::vector<reg::EpochStats> epochs;
  std::uint64_t params_hash = 0;
};

struct FaithRecord {
  std::string split;
  std::string model_run;
  std::map<std::string, std::vector<faith::SweepResult>> keep_interval;  // by source
  std::map<std::string, std::vector<faith::TVDRecord>> region_tvd;      // by source
  std::map<std::string, double> rank_tvd_spearman;                      // by source
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::size_t best_pretrain_epoch = 0;
  std::vector<double> pretrain_val;  // overall val accuracy per epoch
  std::vector<RunRecord> runs;       // "pretrained" first, then the configured modes
  std::map<std::string, std::map<std::string, MetricsRecord>> baselines;  // kind -> split
  std::optional<FaithRecord> faithfulness;
  /// Set when the seed stopped early; completed runs are kept.
  std::optional<std::string> failed_stage;
  std::optional<std::string> error;

  const RunRecord* run(const std::string& name) const;
};

struct ExperimentResult {
  std::string config_hash;
  std::vector<SeedResult> seeds;  // in config order
};

/// Everything for one seed: data, pretraining, each configured run evaluated
/// on all three splits, baselines and faithfulness probes. Exceptions are
/// caught and recorded in failed_stage / error. When `out_dir` is set, epoch
/// CSVs and checkpoints are written there.
SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed,
                    const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// Runs every seed (config.jobs workers), then writes into `out_dir`:
/// metrics.json, failures.json, plot-data CSVs and one seed_<n>/ directory
/// per seed. Output bytes depend only on the config.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& out_dir);

/// Deterministic JSON text of a result (the metrics.json payload).
std::string metrics_json(const ExperimentResult& result);
/// Inverse of metrics_json for the fields report() needs.
ExperimentResult parse_metrics_json(const std::string& text);

/// Writes the plot-data CSVs (ignored keys per epoch, keep-interval accuracy,
/// region TVD, lambda grid) for `result` into `dir`.
void write_plot_data(const ExperimentResult& result, const std::filesystem::path& dir);

/// Median over seeds of (attreg - plain) on `split`; nullopt when missing.
std::optional<double> median_delta(const ExperimentResult& result, const std::string& run_a,
                                   const std::string& run_b, const std::string& split);

double median(std::vector<double> values);

/// Merges metrics.json files into an accuracy table (one row per run and
/// split with median, min and max over all seeds) written as CSV to `out`.
/// Returns the table as markdown.
std::string report(const std::vector<std::filesystem::path>& metrics_files,
                   const std::filesystem::path& out_csv);

}  // namespace attreg::harness
