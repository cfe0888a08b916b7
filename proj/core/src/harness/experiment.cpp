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

#include "attreg/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "attreg/error.hpp"
#include "attreg/harness/baselines.hpp"
#include "attreg/model/checkpoint.hpp"

namespace attreg::harness {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double kIntervals[][2] = {{0, 20}, {20, 40}, {40, 60}, {60, 80}, {80, 100}};
constexpr faith::GroundingSource kSources[] = {faith::GroundingSource::kAttention,
                                               faith::GroundingSource::kGradient,
                                               faith::GroundingSource::kUniform};

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string lambda_run_name(double lambda) { return "lambda=" + shortest(lambda); }

reg::TrainConfig train_config(const ExperimentConfig& config, std::uint64_t seed,
                              reg::CurationPolicy policy, std::vector<double> lrs,
                              bool track_ignored) {
  reg::TrainConfig tc;
  tc.epoch_lrs = std::move(lrs);
  tc.batch_size = config.optimizer.batch_size;
  tc.seed = seed;
  tc.policy = policy;
  tc.reg = config.reg;
  tc.track_ignored = track_ignored;
  return tc;
}

std::vector<double> finetune_lrs(const OptimizerConfig& o) {
  return std::vector<double>(o.finetune_epochs, o.lr_finetune);
}

RunRecord record_run(std::string name, const model::Model& model,
                     const data::Benchmark& benchmark, std::vector<reg::EpochStats> epochs) {
  RunRecord r;
  r.name = std::move(name);
  for (const auto* split : {&benchmark.train, &benchmark.val, &benchmark.test}) {
    r.splits[split->name] = evaluate(model, *split);
  }
  r.epochs = std::move(epochs);
  r.params_hash = model::params_hash(model.params);
  return r;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
  if (!out) throw FormatError("failed writing " + path.string());
}

json to_json(const MetricsRecord& m) {
  json j;
  j["split"] = m.split;
  j["overall"] = m.overall;
  j["n"] = m.n;
  for (auto c : data::kAllCategories) {
    const auto& cm = m.category(c);
    j[std::string(data::to_string(c))] = {{"accuracy", cm.accuracy}, {"n", cm.n}};
  }
  return j;
}

MetricsRecord metrics_from_json(const json& j) {
  MetricsRecord m;
  m.split = j.at("split").get<std::string>();
  m.overall = j.at("overall").get<double>();
  m.n = j.at("n").get<std::size_t>();
  for (auto c : data::kAllCategories) {
    const auto& cj = j.at(std::string(data::to_string(c)));
    auto& cm = m.categories[static_cast<std::size_t>(c)];
    cm.accuracy = cj.at("accuracy").get<double>();
    cm.n = cj.at("n").get<std::size_t>();
  }
  return m;
}

json to_json(const reg::EpochStats& s) {
  return {{"epoch", s.epoch},
          {"mean_ignored_key_count", s.mean_ignored_key_count},
          {"l_vqa", s.l_vqa},
          {"l_reg", s.l_reg},
          {"curated", s.curated},
          {"skipped", s.skipped},
          {"regularized", s.regularized}};
}

reg::EpochStats epoch_from_json(const json& j) {
  reg::EpochStats s;
  s.epoch = j.at("epoch").get<std::size_t>();
  s.mean_ignored_key_count = j.at("mean_ignored_key_count").get<double>();
  s.l_vqa = j.at("l_vqa").get<double>();
  s.l_reg = j.at("l_reg").get<double>();
  s.curated = j.at("curated").get<std::size_t>();
  s.skipped = j.at("skipped").get<std::size_t>();
  s.regularized = j.at("regularized").get<bool>();
  return s;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

FaithRecord faithfulness(const model::Model& model, const std::string& run,
                         const data::DatasetSplit& split, std::uint64_t seed) {
  FaithRecord f;
  f.split = split.name;
  f.model_run = run;
  for (auto source : kSources) {
    const std::string name(faith::to_string(source));
    for (const auto& iv : kIntervals) {
      f.keep_interval[name].push_back(
          faith::keep_interval_eval(model, split, iv[0], iv[1], source, seed));
    }
    f.region_tvd[name] = faith::region_tvd_curve(model, split, source, seed);
    f.rank_tvd_spearman[name] = faith::curve_correlation(f.region_tvd[name]);
  }
  return f;
}

}  // namespace

const RunRecord* SeedResult::run(const std::string& name) const {
  for (const auto& r : runs)
    if (r.name == name) return &r;
  return nullptr;
}

model::Model initial_model(const ExperimentConfig& config, const data::Benchmark& benchmark,
                           std::uint64_t seed, bool uniform_attention) {
  model::ModelConfig dims = config.dims;
  dims.feature_dim = benchmark.train.feature_dim;
  dims.uniform_attention = uniform_attention;
  return model::make_model(dims, benchmark.train.answer_vocab, seed);
}

PretrainResult pretrain(const model::Model& start, const data::Benchmark& benchmark,
                        const OptimizerConfig& optimizer, std::uint64_t seed) {
  reg::TrainConfig tc;
  tc.epoch_lrs.assign(optimizer.pretrain_epochs, optimizer.lr_pretrain);
  tc.batch_size = optimizer.batch_size;
  tc.seed = seed;
  tc.track_ignored = false;
  PretrainResult result;
  result.model = model::clone_model(start);
  double best = -1.0;
  auto hook = [&](std::size_t epoch, const model::Model& m) {
    auto record = evaluate(m, benchmark.val);
    if (record.overall > best) {
      best = record.overall;
      result.best_epoch = epoch;
      result.model = model::clone_model(m);
    }
    result.val_by_epoch.push_back(std::move(record));
  };
  result.epochs = reg::train(start, benchmark.train, tc, hook).epochs;
  return result;
}

SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed,
                    const std::optional<fs::path>& out_dir) {
  SeedResult result;
  result.seed = seed;
  std::string stage = "data";
  auto save = [&](const std::string& name, const model::Model& m,
                  const std::vector<reg::EpochStats>& epochs) {
    if (!out_dir) return;
    model::save_checkpoint(*out_dir / (name + ".ckpt.json"), m);
    std::ostringstream csv;
    reg::write_epoch_csv(csv, epochs);
    write_text(*out_dir / (name + ".epochs.csv"), csv.str());
  };
  try {
    if (out_dir) fs::create_directories(*out_dir);
    const auto benchmark = data::generate_benchmark(config.data, seed);

    stage = "pretrain";
    const auto pre = pretrain(initial_model(config, benchmark, seed), benchmark,
                              config.optimizer, seed);
    result.best_pretrain_epoch = pre.best_epoch;
    for (const auto& r : pre.val_by_epoch) result.pretrain_val.push_back(r.overall);
    save("pretrained", pre.model, pre.epochs);
    result.runs.push_back(record_run("pretrained", pre.model, benchmark, pre.epochs));

    const auto lrs = finetune_lrs(config.optimizer);
    std::optional<model::Model> plain_model;
    auto finetune = [&](const std::string& name, reg::CurationPolicy policy,
                        const reg::RegConfig& reg, bool track) {
      stage = name;
      auto tc = train_config(config, seed, policy, lrs, track);
      tc.reg = reg;
      auto r = reg::train(pre.model, benchmark.train, tc);
      save(name, r.model, r.epochs);
      result.runs.push_back(record_run(name, r.model, benchmark, std::move(r.epochs)));
      if (name == "plain") plain_model = std::move(r.model);
    };

    for (const auto& mode : config.modes) {
      if (mode == "plain") {
        finetune(mode, reg::CurationPolicy::kNone, config.reg, true);
      } else if (mode == "attreg") {
        finetune(mode, reg::CurationPolicy::kAttReg, config.reg, true);
      } else if (mode == "rand_mask") {
        finetune(mode, reg::CurationPolicy::kRandMask, config.reg, true);
      } else if (mode == "rand_img") {
        finetune(mode, reg::CurationPolicy::kRandImg, config.reg, true);
      } else if (mode == "attreg_e2e") {
        stage = mode;
        std::vector<double> all(config.optimizer.pretrain_epochs, config.optimizer.lr_pretrain);
        all.insert(all.end(), lrs.begin(), lrs.end());
        auto tc = train_config(config, seed, reg::CurationPolicy::kAttReg, all, false);
        tc.reg.start_epoch = 0;
        auto r = reg::train(initial_model(config, benchmark, seed), benchmark.train, tc);
        save(mode, r.model, r.epochs);
        result.runs.push_back(record_run(mode, r.model, benchmark, std::move(r.epochs)));
      } else if (mode == "uniform_attention") {
        stage = mode;
        const auto upre = pretrain(initial_model(config, benchmark, seed, true), benchmark,
                                   config.optimizer, seed);
        auto tc = train_config(config, seed, reg::CurationPolicy::kNone, lrs, false);
        auto r = reg::train(upre.model, benchmark.train, tc);
        save(mode, r.model, r.epochs);
        result.runs.push_back(record_run(mode, r.model, benchmark, std::move(r.epochs)));
      }
    }
    for (double lambda : config.lambdas) {
      auto reg = config.reg;
      reg.lambda = lambda;
      finetune(lambda_run_name(lambda), reg::CurationPolicy::kAttReg, reg, false);
    }

    stage = "baselines";
    for (const auto& name : config.baselines) {
      const auto kind = parse_baseline(name);
      for (const auto* split : {&benchmark.val, &benchmark.test}) {
        result.baselines[name][split->name] =
            run_baseline(kind, benchmark.train, *split, seed, &pre.model);
      }
    }

    if (config.faithfulness) {
      stage = "faithfulness";
      const bool use_plain = plain_model.has_value();
      result.faithfulness = faithfulness(use_plain ? *plain_model : pre.model,
                                         use_plain ? "plain" : "pretrained", benchmark.val,
                                         seed);
    }
  } catch (const std::exception& e) {
    result.failed_stage = stage;
    result.error = e.what();
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const fs::path& out_dir) {
  config.validate();
  fs::create_directories(out_dir);
  write_text(out_dir / "config.ini", to_text(config));

  ExperimentResult result;
  result.config_hash = config_hash(config);
  result.seeds.resize(config.seeds.size());
  std::size_t jobs = config.jobs ? config.jobs : std::thread::hardware_concurrency();
  jobs = std::clamp<std::size_t>(jobs, 1, config.seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      const auto seed = config.seeds[i];
      result.seeds[i] = run_seed(config, seed, out_dir / ("seed_" + std::to_string(seed)));
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  write_text(out_dir / "metrics.json", metrics_json(result));
  json failures = json::array();
  for (const auto& s : result.seeds) {
    if (s.failed_stage) {
      failures.push_back({{"seed", s.seed}, {"stage", *s.failed_stage}, {"error", *s.error}});
    }
  }
  write_text(out_dir / "failures.json", failures.dump(2) + "\n");
  write_plot_data(result, out_dir);
  return result;
}

std::string metrics_json(const ExperimentResult& result) {
  json root;
  root["config_hash"] = result.config_hash;
  json seeds = json::array();
  for (const auto& s : result.seeds) {
    json js;
    js["seed"] = s.seed;
    js["best_pretrain_epoch"] = s.best_pretrain_epoch;
    js["pretrain_val"] = s.pretrain_val;
    json runs = json::object();
    for (const auto& r : s.runs) {
      json jr;
      for (const auto& [split, m] : r.splits) jr["splits"][split] = to_json(m);
      jr["epochs"] = json::array();
      for (const auto& e : r.epochs) jr["epochs"].push_back(to_json(e));
      jr["params_hash"] = hex(r.params_hash);
      runs[r.name] = std::move(jr);
    }
    js["runs"] = std::move(runs);
    json baselines = json::object();
    for (const auto& [kind, splits] : s.baselines) {
      for (const auto& [split, m] : splits) baselines[kind][split] = to_json(m);
    }
    js["baselines"] = std::move(baselines);
    if (s.faithfulness) {
      const auto& f = *s.faithfulness;
      json jf;
      jf["split"] = f.split;
      jf["model_run"] = f.model_run;
      for (const auto& [source, sweep] : f.keep_interval) {
        for (const auto& r : sweep) {
          jf["keep_interval"][source].push_back(
              {{"lo", r.lo}, {"hi", r.hi}, {"accuracy", r.accuracy}, {"n", r.n},
               {"mean_kept", r.mean_kept}});
        }
      }
      for (const auto& [source, curve] : f.region_tvd) {
        for (const auto& r : curve) {
          jf["region_tvd"][source].push_back(
              {{"rank", r.rank}, {"mean_tvd", r.mean_tvd}, {"n", r.n}});
        }
      }
      for (const auto& [source, rho] : f.rank_tvd_spearman) jf["rank_tvd_spearman"][source] = rho;
      js["faithfulness"] = std::move(jf);
    }
    if (s.failed_stage) {
      js["failed_stage"] = *s.failed_stage;
      js["error"] = *s.error;
    }
    seeds.push_back(std::move(js));
  }
  root["seeds"] = std::move(seeds);

  json summary = json::object();
  for (const auto& [a, b] : {std::pair<std::string, std::string>{"attreg", "plain"},
                             {"rand_mask", "plain"},
                             {"attreg_e2e", "attreg"},
                             {"uniform_attention", "plain"}}) {
    for (const auto* split : {"val_indomain", "test_ood"}) {
      if (auto d = median_delta(result, a, b, split)) {
        summary[a + "_minus_" + b][split] = *d;
      }
    }
  }
  root["median_deltas"] = std::move(summary);
  return root.dump(2) + "\n";
}

ExperimentResult parse_metrics_json(const std::string& text) {
  ExperimentResult result;
  try {
    const auto root = json::parse(text);
    result.config_hash = root.at("config_hash").get<std::string>();
    for (const auto& js : root.at("seeds")) {
      SeedResult s;
      s.seed = js.at("seed").get<std::uint64_t>();
      s.best_pretrain_epoch = js.at("best_pretrain_epoch").get<std::size_t>();
      s.pretrain_val = js.at("pretrain_val").get<std::vector<double>>();
      for (const auto& [name, jr] : js.at("runs").items()) {
        RunRecord r;
        r.name = name;
        for (const auto& [split, jm] : jr.at("splits").items()) {
          r.splits[split] = metrics_from_json(jm);
        }
        for (const auto& je : jr.at("epochs")) r.epochs.push_back(epoch_from_json(je));
        r.params_hash = std::stoull(jr.at("params_hash").get<std::string>(), nullptr, 16);
        s.runs.push_back(std::move(r));
      }
      for (const auto& [kind, splits] : js.at("baselines").items()) {
        for (const auto& [split, jm] : splits.items()) {
          s.baselines[kind][split] = metrics_from_json(jm);
        }
      }
      if (js.contains("failed_stage")) {
        s.failed_stage = js.at("failed_stage").get<std::string>();
        s.error = js.at("error").get<std::string>();
      }
      result.seeds.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("metrics.json: ") + e.what());
  }
  return result;
}

void write_plot_data(const ExperimentResult& result, const fs::path& dir) {
  std::ostringstream ignored, keep, tvd, lambda;
  for (std::ostringstream* s : {&ignored, &keep, &tvd, &lambda}) s->precision(17);
  ignored << "seed,run,epoch,mean_ignored_key_count\n";
  keep << "seed,source,lo,hi,accuracy,mean_kept\n";
  tvd << "seed,source,rank,mean_tvd,n\n";
  lambda << "seed,lambda,val_indomain,test_ood\n";
  for (const auto& s : result.seeds) {
    for (const auto& r : s.runs) {
      if (r.name == "plain" || r.name == "attreg" || r.name == "rand_mask" ||
          r.name == "rand_img") {
        for (const auto& e : r.epochs) {
          ignored << s.seed << ',' << r.name << ',' << e.epoch << ','
                  << e.mean_ignored_key_count << '\n';
        }
      }
      if (r.name.rfind("lambda=", 0) == 0) {
        lambda << s.seed << ',' << r.name.substr(7) << ',' << r.splits.at("val_indomain").overall
               << ',' << r.splits.at("test_ood").overall << '\n';
      }
    }
    if (s.faithfulness) {
      for (const auto& [source, sweep] : s.faithfulness->keep_interval) {
        for (const auto& r : sweep) {
          keep << s.seed << ',' << source << ',' << r.lo << ',' << r.hi << ',' << r.accuracy
               << ',' << r.mean_kept << '\n';
        }
      }
      for (const auto& [source, curve] : s.faithfulness->region_tvd) {
        for (const auto& r : curve) {
          tvd << s.seed << ',' << source << ',' << r.rank << ',' << r.mean_tvd << ',' << r.n
              << '\n';
        }
      }
    }
  }
  write_text(dir / "plot_ignored_keys.csv", ignored.str());
  write_text(dir / "plot_keep_interval.csv", keep.str());
  write_text(dir / "plot_region_tvd.csv", tvd.str());
  write_text(dir / "plot_lambda.csv", lambda.str());
}

double median(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::optional<double> median_delta(const ExperimentResult& result, const std::string& run_a,
                                   const std::string& run_b, const std::string& split) {
  std::vector<double> deltas;
  for (const auto& s : result.seeds) {
    const auto* a = s.run(run_a);
    const auto* b = s.run(run_b);
    if (!a || !b || !a->splits.count(split) || !b->splits.count(split)) continue;
    deltas.push_back(a->splits.at(split).overall - b->splits.at(split).overall);
  }
  if (deltas.empty()) return std::nullopt;
  return median(std::move(deltas));
}

std::string report(const std::vector<fs::path>& metrics_files, const fs::path& out_csv) {
  // (run, split) -> accuracies over every seed of every file, first-seen order.
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<double>> values;
  auto add = [&](const std::string& run, const std::string& split, double v) {
    const auto key = std::make_pair(run, split);
    if (!values.count(key)) order.push_back(key);
    values[key].push_back(v);
  };
  for (const auto& path : metrics_files) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const auto result = parse_metrics_json(buf.str());
    for (const auto& s : result.seeds) {
      for (const auto& r : s.runs) {
        for (const auto& [split, m] : r.splits) add(r.name, split, m.overall);
      }
      for (const auto& [kind, splits] : s.baselines) {
        for (const auto& [split, m] : splits) add(kind, split, m.overall);
      }
    }
  }
  std::ostringstream csv, md;
  csv.precision(17);
  csv << "run,split,median,min,max,seeds\n";
  md << "| run | split | median | min | max | seeds |\n|---|---|---|---|---|---|\n";
  for (const auto& key : order) {
    const auto& v = values[key];
    const double med = median(v);
    const double lo = *std::min_element(v.begin(), v.end());
    const double hi = *std::max_element(v.begin(), v.end());
    csv << key.first << ',' << key.second << ',' << med << ',' << lo << ',' << hi << ','
        << v.size() << '\n';
    char row[256];
    std::snprintf(row, sizeof row, "| %s | %s | %.4f | %.4f | %.4f | %zu |\n", key.first.c_str(),
                  key.second.c_str(), med, lo, hi, v.size());
    md << row;
  }
  write_text(out_csv, csv.str());
  return md.str();
}

}  // namespace attreg::harness
