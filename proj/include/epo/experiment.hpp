// Copyright 2026 The EPO Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EPO_EXPERIMENT_HPP_
#define EPO_EXPERIMENT_HPP_

// Experiment runner behind the CLI. Layout of an output directory:
//
//   <out>/config.snapshot        resolved configuration
//   <out>/aggregate.csv          per-seed results plus mean and 95% CI
//   <out>/summary.json           aggregate in machine-readable form
//   <out>/seed_<n>/              config.snapshot, history.csv, metrics.csv,
//                                best.checkpoint, ledger.json
//
// Sweeps nest one such directory per value under value_<v>/ and add
// sweep.csv and curve.csv. Hyperparameter search writes search_results.csv.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "epo/checkpoint.hpp"
#include "epo/config.hpp"
#include "epo/env.hpp"
#include "epo/error.hpp"
#include "epo/hyper_search.hpp"
#include "epo/ledger.hpp"
#include "epo/nn.hpp"
#include "epo/orchestrator.hpp"
#include "epo/ppo.hpp"
#include "epo/rng.hpp"
#include "epo/text.hpp"

namespace epo {

// ---------------------------------------------------------------------------
// Statistics

inline double mean_of(std::span<const double> v) {
  if (v.empty()) throw ContractViolation("mean_of: empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
inline double sample_stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Two-sided 95% critical value: Student t with n - 1 degrees of freedom for
/// n <= 31, the normal quantile beyond.
inline double critical_value_95(std::size_t n) {
  static constexpr double kT[] = {
      12.706205, 4.302653, 3.182446, 2.776445, 2.570582, 2.446912, 2.364624,
      2.306004,  2.262157, 2.228139, 2.200985, 2.178813, 2.160369, 2.144787,
      2.131450,  2.119905, 2.109816, 2.100922, 2.093024, 2.085963, 2.079614,
      2.073873,  2.068658, 2.063899, 2.059539, 2.055529, 2.051831, 2.048407,
      2.045230,  2.042272};
  if (n < 2) throw ContractViolation("critical_value_95: need at least 2 samples");
  const std::size_t df = n - 1;
  return df <= std::size(kT) ? kT[df - 1] : 1.959964;
}

/// Half-width of the 95% confidence interval of the mean; 0 for n < 2.
inline double ci95_halfwidth(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  return critical_value_95(v.size()) * sample_stddev(v) /
         std::sqrt(static_cast<double>(v.size()));
}

/// Percentage of samples A saves relative to B: (1 - a/b) * 100.
inline double sample_reduction_percent(double samples_a, double samples_b) {
  if (!(samples_b > 0.0))
    throw ContractViolation("sample_reduction_percent: reference sample count must be > 0");
  return (1.0 - samples_a / samples_b) * 100.0;
}

// ---------------------------------------------------------------------------
// Single-seed runs

struct HistoryRow {
  long long generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  LedgerCounts ledger;
};

inline void write_history_csv(std::ostream& out, const std::vector<HistoryRow>& rows) {
  out << "generation,best_fitness,mean_fitness,steps_pretrain,steps_finetune,steps_eval,"
         "steps_total\n";
  for (const auto& r : rows)
    out << r.generation << ',' << text::format_double(r.best_fitness) << ','
        << text::format_double(r.mean_fitness) << ',' << r.ledger.pretrain << ','
        << r.ledger.finetune << ',' << r.ledger.eval << ',' << r.ledger.total() << '\n';
}

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<HistoryRow> history;
  LedgerCounts ledger;        // training and fitness evaluation
  RunReport report;           // final evaluation
  std::uint64_t final_eval_steps = 0;  // not part of `ledger`
  NetworkSpec spec;
  ParameterVector best;
  MetricsStream metrics;
};

/// Seed for the post-training evaluation episodes, disjoint from every
/// training and fitness seed.
inline std::uint64_t final_evaluation_seed(std::uint64_t seed) {
  return derive_seed(seed, {0xF1A1});
}

namespace detail {

inline SeedRun run_ppo_seed(const ExperimentConfig& c, const Environment& env,
                            std::uint64_t seed) {
  SeedRun out;
  out.seed = seed;
  out.spec = c.epo.network_for(env);
  SampleLedger ledger;
  Rng init_rng(derive_seed(seed, {1}));
  BudgetClock clock(c.epo.budget);
  const long long total = c.epo.budget.env_steps > 0
                              ? static_cast<long long>(c.epo.budget.env_steps)
                              : std::numeric_limits<long long>::max() / 4;
  double last_best = 0.0, last_mean = 0.0;
  TrainHooks hooks;
  hooks.metrics = &out.metrics;
  hooks.stop = [&] { return clock.time_exhausted(); };
  hooks.on_cycle = [&](long long cycle, const Rollout& r, const PpoDiagnostics&) {
    // Training-episode rewards stand in for fitness; a cycle without a
    // finished episode repeats the previous row's values.
    if (!r.episode_rewards.empty()) {
      last_best = *std::ranges::max_element(r.episode_rewards);
      last_mean = mean_of(r.episode_rewards);
    }
    out.history.push_back({cycle, last_best, last_mean, ledger.snapshot()});
  };
  out.best = train(initialize_parameters(out.spec, init_rng), out.spec, env, total,
                   c.epo.ppo, derive_seed(seed, {2}), ledger, StepCategory::kBaseline,
                   hooks);
  out.ledger = ledger.snapshot();
  return out;
}

inline SeedRun run_epo_seed(const ExperimentConfig& c, const Environment& env,
                            std::uint64_t seed) {
  SeedRun out;
  out.seed = seed;
  out.spec = c.epo.network_for(env);
  SampleLedger ledger;
  RunOptions options;
  options.metrics = &out.metrics;
  if (c.mode == Mode::kEpoTransfer)
    options.seed_population = load_population_seed(c.transfer_checkpoint, c.epo, env);
  auto result = run(c.epo, env, seed, ledger, options);
  for (const auto& g : result.history)
    out.history.push_back({g.generation, g.best_fitness, g.mean_fitness, g.ledger});
  out.best = std::move(result.best.params);
  out.ledger = result.ledger;
  return out;
}

}  // namespace detail

/// Trains one seed of a ppo/epo/epo-nopt/pure-evo/epo-tl experiment and
/// evaluates the result over `report_episodes` greedy episodes.
inline SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed) {
  const ExperimentConfig c = resolve(config);
  const auto env = make_environment(c.env);
  SeedRun out;
  switch (c.mode) {
    case Mode::kPpo:
      out = detail::run_ppo_seed(c, *env, seed);
      break;
    case Mode::kEpo:
    case Mode::kEpoNoPretrain:
    case Mode::kPureEvo:
    case Mode::kEpoTransfer:
      out = detail::run_epo_seed(c, *env, seed);
      break;
    default:
      throw ContractViolation("run_seed: mode " + std::string(to_string(c.mode)) +
                              " is not a single-run mode");
  }
  const auto eval = evaluate_policy(out.best, out.spec, *env, c.report_episodes,
                                    final_evaluation_seed(seed));
  out.report = summarize(eval.episode_rewards, out.ledger);
  out.final_eval_steps = eval.env_steps;
  return out;
}

inline nlohmann::json seed_summary_json(const ExperimentConfig& c, const SeedRun& r) {
  nlohmann::json j;
  j["seed"] = r.seed;
  j["mode"] = to_string(c.mode);
  j["env"] = to_string(c.env.id);
  j["generations"] = r.history.size();
  j["ledger"] = r.ledger;
  j["final_eval"] = {{"episodes", r.report.episodes},
                     {"mean_reward", r.report.mean_reward},
                     {"best_reward", r.report.best_reward},
                     {"env_steps", r.final_eval_steps}};
  return j;
}

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

}  // namespace detail

inline void write_seed_dir(const std::filesystem::path& dir, const ExperimentConfig& c,
                           const SeedRun& r, std::string_view env_name) {
  std::filesystem::create_directories(dir);
  ExperimentConfig single = c;
  single.seeds = {r.seed};
  auto snap = detail::open_out(dir / "config.snapshot");
  write_snapshot(snap, single);
  auto hist = detail::open_out(dir / "history.csv");
  write_history_csv(hist, r.history);
  auto metrics = detail::open_out(dir / "metrics.csv");
  r.metrics.write_csv(metrics);
  save_checkpoint(dir / "best.checkpoint",
                  Checkpoint{std::string(env_name), r.spec, r.best, r.seed, r.ledger});
  auto ledger = detail::open_out(dir / "ledger.json");
  ledger << seed_summary_json(c, r).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Aggregation

struct SeedSummary {
  std::uint64_t seed = 0;
  double mean_reward = 0.0;
  double best_reward = 0.0;
  LedgerCounts ledger;
};

struct Aggregate {
  std::string mode;
  std::string env;
  std::vector<SeedSummary> seeds;
  double mean_reward = 0.0;
  double ci95_halfwidth = 0.0;
  double best_reward = 0.0;  // best single final-evaluation episode
  double mean_steps_total = 0.0;
};

inline Aggregate aggregate(std::string mode, std::string env,
                           std::vector<SeedSummary> seeds) {
  if (seeds.empty()) throw ContractViolation("aggregate: no seeds");
  Aggregate a{std::move(mode), std::move(env), std::move(seeds)};
  std::vector<double> means, steps;
  a.best_reward = -std::numeric_limits<double>::infinity();
  for (const auto& s : a.seeds) {
    means.push_back(s.mean_reward);
    steps.push_back(static_cast<double>(s.ledger.total()));
    a.best_reward = std::max(a.best_reward, s.best_reward);
  }
  a.mean_reward = mean_of(means);
  a.ci95_halfwidth = epo::ci95_halfwidth(means);
  a.mean_steps_total = mean_of(steps);
  return a;
}

/// Reads seed_*/ledger.json under `dir`, ordered by seed.
inline Aggregate aggregate_from_dir(const std::filesystem::path& dir) {
  std::vector<SeedSummary> seeds;
  std::string mode, env;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (!entry.is_directory() || !name.starts_with("seed_")) continue;
    const auto j = detail::read_json(entry.path() / "ledger.json");
    SeedSummary s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.mean_reward = j.at("final_eval").at("mean_reward").get<double>();
    s.best_reward = j.at("final_eval").at("best_reward").get<double>();
    s.ledger = j.at("ledger").get<LedgerCounts>();
    mode = j.at("mode").get<std::string>();
    env = j.at("env").get<std::string>();
    seeds.push_back(s);
  }
  if (seeds.empty()) throw ConfigError(dir.string() + ": no seed_* run directories");
  std::ranges::sort(seeds, {}, &SeedSummary::seed);
  return aggregate(mode, env, std::move(seeds));
}

inline void write_aggregate_csv(std::ostream& out, const Aggregate& a) {
  out << "seed,mean_reward,best_reward,steps_total\n";
  for (const auto& s : a.seeds)
    out << s.seed << ',' << text::format_double(s.mean_reward) << ','
        << text::format_double(s.best_reward) << ',' << s.ledger.total() << '\n';
  out << "mean," << text::format_double(a.mean_reward) << ','
      << text::format_double(a.best_reward) << ','
      << text::format_double(a.mean_steps_total) << '\n';
  out << "ci95_halfwidth," << text::format_double(a.ci95_halfwidth) << ",,\n";
}

inline nlohmann::json aggregate_json(const Aggregate& a) {
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& s : a.seeds)
    seeds.push_back({{"seed", s.seed},
                     {"mean_reward", s.mean_reward},
                     {"best_reward", s.best_reward},
                     {"ledger", s.ledger}});
  return {{"mode", a.mode},
          {"env", a.env},
          {"mean_reward", a.mean_reward},
          {"ci95_halfwidth", a.ci95_halfwidth},
          {"best_reward", a.best_reward},
          {"mean_steps_total", a.mean_steps_total},
          {"seeds", seeds}};
}

// ---------------------------------------------------------------------------
// Experiments

struct ExperimentResult {
  // One aggregate per run directory: a single entry for plain modes, one per
  // value for sweeps, none for hypersearch.
  std::vector<std::pair<long long, Aggregate>> aggregates;
  std::optional<Leaderboard> leaderboard;
};

namespace detail {

inline Aggregate run_seeds(const ExperimentConfig& c, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);
  {
    auto snap = open_out(out / "config.snapshot");
    write_snapshot(snap, c);
  }
  const auto env_name = to_string(c.env.id);
  std::vector<SeedSummary> seeds;
  for (auto seed : c.seeds) {
    const auto r = run_seed(c, seed);
    write_seed_dir(out / ("seed_" + std::to_string(seed)), c, r, env_name);
    seeds.push_back({seed, r.report.mean_reward, r.report.best_reward, r.ledger});
  }
  auto a = aggregate(std::string(to_string(c.mode)), env_name, std::move(seeds));
  auto csv = open_out(out / "aggregate.csv");
  write_aggregate_csv(csv, a);
  auto js = open_out(out / "summary.json");
  js << aggregate_json(a).dump(2) << '\n';
  return a;
}

inline std::vector<HistoryRow> read_history_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::vector<HistoryRow> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto f = text::split(line, ',');
    if (f.size() != 7) throw ConfigError(p.string() + ": malformed row '" + line + "'");
    HistoryRow r;
    r.generation = text::parse_int<long long>(f[0], "generation");
    r.best_fitness = text::parse_double(f[1], "best_fitness");
    r.mean_fitness = text::parse_double(f[2], "mean_fitness");
    r.ledger.pretrain = text::parse_int<std::uint64_t>(f[3], "steps_pretrain");
    r.ledger.finetune = text::parse_int<std::uint64_t>(f[4], "steps_finetune");
    r.ledger.eval = text::parse_int<std::uint64_t>(f[5], "steps_eval");
    r.ledger.baseline =
        text::parse_int<std::uint64_t>(f[6], "steps_total") - r.ledger.total();
    rows.push_back(r);
  }
  return rows;
}

inline Aggregate run_sweep(const ExperimentConfig& c, const std::filesystem::path& out,
                           std::vector<std::pair<long long, Aggregate>>& results) {
  std::filesystem::create_directories(out);
  {
    auto snap = open_out(out / "config.snapshot");
    write_snapshot(snap, c);
  }
  auto sweep = open_out(out / "sweep.csv");
  auto curve = open_out(out / "curve.csv");
  sweep << "value,mean_reward,ci95_halfwidth,mean_steps_total\n";
  curve << "value,generation,seeds,mean_best_fitness,mean_fitness,mean_steps_total\n";
  for (long long v : c.sweep_values) {
    ExperimentConfig sub = c;
    sub.mode = Mode::kEpo;
    if (c.mode == Mode::kSweepPretrain) sub.epo.pretrain_timesteps = v;
    else sub.epo.finetune_timesteps = v;
    const auto dir = out / ("value_" + std::to_string(v));
    sub.out = dir.string();
    auto a = run_seeds(resolve(sub), dir);
    sweep << v << ',' << text::format_double(a.mean_reward) << ','
          << text::format_double(a.ci95_halfwidth) << ','
          << text::format_double(a.mean_steps_total) << '\n';

    // Mean curve over seeds, per generation index.
    std::map<long long, std::vector<HistoryRow>> by_gen;
    for (auto seed : c.seeds)
      for (const auto& row :
           read_history_csv(dir / ("seed_" + std::to_string(seed)) / "history.csv"))
        by_gen[row.generation].push_back(row);
    for (const auto& [g, rows] : by_gen) {
      double best = 0, mean = 0, steps = 0;
      for (const auto& r : rows) {
        best += r.best_fitness;
        mean += r.mean_fitness;
        steps += static_cast<double>(r.ledger.total());
      }
      const double n = static_cast<double>(rows.size());
      curve << v << ',' << g << ',' << rows.size() << ',' << text::format_double(best / n)
            << ',' << text::format_double(mean / n) << ','
            << text::format_double(steps / n) << '\n';
    }
    results.emplace_back(v, a);
  }
  return results.back().second;
}

}  // namespace detail

/// Runs the hyperparameter search described by `c` with real EPO trials;
/// each repeat reports its final evaluation mean reward.
inline Leaderboard run_hypersearch(const ExperimentConfig& config) {
  const ExperimentConfig c = resolve(config);
  TrialRunner runner = [&](const SearchPoint& p, std::uint64_t repeat_seed) {
    ExperimentConfig trial = c;
    trial.mode = Mode::kEpo;
    trial.epo.evo = p.apply(c.epo.evo);
    const auto r = run_seed(trial, repeat_seed);
    return TrialOutcome{r.report.mean_reward, r.ledger.total()};
  };
  return run_search(c.search, c.search_trials, c.search_repeats, c.search_seed, runner);
}

/// Runs every seed (or sweep value, or search trial) of `config` and writes
/// the output directory. Configuration errors surface before any step.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  const ExperimentConfig c = resolve(config);
  const std::filesystem::path out = c.out;
  ExperimentResult result;
  switch (c.mode) {
    case Mode::kSweepPretrain:
    case Mode::kSweepFinetune:
      detail::run_sweep(c, out, result.aggregates);
      break;
    case Mode::kHypersearch: {
      std::filesystem::create_directories(out);
      {
        auto snap = detail::open_out(out / "config.snapshot");
        write_snapshot(snap, c);
      }
      result.leaderboard = run_hypersearch(c);
      auto csv = detail::open_out(out / "search_results.csv");
      write_search_csv(csv, *result.leaderboard);
      break;
    }
    default:
      result.aggregates.emplace_back(0, detail::run_seeds(c, out));
      break;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Comparison

struct ComparisonRow {
  std::string label;  // directory name
  std::string mode;
  double mean_reward = 0.0;
  double best_reward = 0.0;
  double samples = 0.0;  // mean total env steps per seed
  // (1 - samples_first / samples_this) * 100; 0 for the first row.
  double sample_reduction_percent = 0.0;
};

struct Comparison {
  std::string env;
  std::vector<ComparisonRow> rows;
};

/// Rows from plain summaries; the first row is method A, compared against
/// every other row as B.
inline Comparison compare(std::string env, std::vector<ComparisonRow> rows) {
  if (rows.size() < 2) throw ConfigError("compare: need at least two runs");
  for (auto& r : rows)
    r.sample_reduction_percent = sample_reduction_percent(rows.front().samples, r.samples);
  return {std::move(env), std::move(rows)};
}

inline Comparison compare(const std::vector<std::filesystem::path>& run_dirs) {
  if (run_dirs.size() < 2) throw ConfigError("compare: need at least two run directories");
  std::string env;
  std::vector<ComparisonRow> rows;
  for (const auto& dir : run_dirs) {
    const auto j = detail::read_json(dir / "summary.json");
    const auto e = j.at("env").get<std::string>();
    if (env.empty()) env = e;
    if (e != env)
      throw ConfigError("compare: incompatible environments '" + env + "' and '" + e +
                        "' (" + dir.string() + ")");
    rows.push_back({dir.filename().string(), j.at("mode").get<std::string>(),
                    j.at("mean_reward").get<double>(), j.at("best_reward").get<double>(),
                    j.at("mean_steps_total").get<double>(), 0.0});
  }
  return compare(env, std::move(rows));
}

inline void write_comparison(std::ostream& out, const Comparison& c) {
  out << "run,mode,mean_reward,best_reward,samples,sample_reduction_percent\n";
  for (const auto& r : c.rows) {
    char pct[32];
    std::snprintf(pct, sizeof(pct), "%.1f", r.sample_reduction_percent);
    out << r.label << ',' << r.mode << ',' << text::format_double(r.mean_reward) << ','
        << text::format_double(r.best_reward) << ',' << text::format_double(r.samples)
        << ',' << pct << '\n';
  }
}

}  // namespace epo

#endif  // EPO_EXPERIMENT_HPP_
