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

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "epo/config.hpp"
#include "epo/experiment.hpp"
#include "test_support.hpp"

namespace epo {
namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return resolve(apply_assignments(ExperimentConfig{}, parse_config_text(in)));
}

TEST(Config, ParsesDottedKeys) {
  const auto c = parse(
      "# comment\n"
      "mode=epo\n"
      "env=cartpole\n"
      "evo.mutation_prob=0.25\n"
      "evo.mutation_sigma_mode=var\n"
      "ppo.rollout_length=256\n"
      "network.hidden=32,16\n"
      "seeds=1-3,7\n"
      "budget.steps=50000\n");
  EXPECT_EQ(c.env.id, EnvId::kCartPole);
  EXPECT_EQ(c.env.horizon, 500);
  EXPECT_EQ(c.epo.evo.mutation_prob, 0.25);
  EXPECT_EQ(c.epo.evo.sigma_mode, SigmaMode::kVar);
  EXPECT_EQ(c.epo.ppo.rollout_length, 256);
  EXPECT_EQ(c.epo.hidden, (std::vector<std::size_t>{32, 16}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{1, 2, 3, 7}));
  EXPECT_EQ(c.epo.budget.env_steps, 50000u);
}

TEST(Config, EnvKeyAppliedBeforeEnvFields) {
  const auto c = parse("env.horizon=77\nenv=cartpole\n");
  EXPECT_EQ(c.env.horizon, 77);
}

TEST(Config, UnknownKeyNamed) {
  try {
    parse("evo.mutation_probability=0.3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("evo.mutation_probability"), std::string::npos);
  }
}

TEST(Config, BadValueNamesKey) {
  try {
    parse("ppo.epochs=ten\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ppo.epochs"), std::string::npos);
  }
  EXPECT_THROW(parse("mode=tpe\n"), ConfigError);
  EXPECT_THROW(parse("seeds=5-1\n"), ConfigError);
  EXPECT_THROW(parse("justtext\n"), ConfigError);
}

TEST(Config, ModeForcedValues) {
  const auto pe = parse("mode=pure-evo\nepo.pretrain_timesteps=30000\n");
  EXPECT_EQ(pe.epo.pretrain_timesteps, 0);
  EXPECT_EQ(pe.epo.finetune_timesteps, 0);
  const auto nopt = parse("mode=epo-nopt\n");
  EXPECT_EQ(nopt.epo.pretrain_timesteps, 0);
  EXPECT_EQ(nopt.epo.finetune_timesteps, 500);
}

TEST(Config, ModeRequirements) {
  EXPECT_THROW(parse("mode=epo-tl\n"), ConfigError);
  EXPECT_THROW(parse("mode=sweep-pretrain\n"), ConfigError);
  EXPECT_THROW(parse("mode=sweep-pretrain\nsweep.values=0,100\n"), ConfigError);
  EXPECT_NO_THROW(parse("mode=sweep-pretrain\nsweep.values=0,10000,20000\n"));
  EXPECT_THROW(parse("mode=ppo\nbudget.steps=100\n"), ConfigError);
  EXPECT_THROW(parse("evo.elite_count=8\n"), ConfigError);
}

TEST(Config, SnapshotRoundTrips) {
  const auto c = parse("mode=ppo\nenv=catch-dense\nppo.learning_rate=0.0007\nseeds=4,5\n");
  const auto snap = snapshot_string(c);
  const auto again = parse(snap);
  EXPECT_EQ(snapshot_string(again), snap);
  // Every key is present.
  std::istringstream in(snap);
  EXPECT_EQ(parse_config_text(in).size(), detail::config_keys().size());
}

TEST(Stats, CiHalfWidth) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  // sd = sqrt(5/3), t(0.975, 3) = 3.182446.
  EXPECT_NEAR(ci95_halfwidth(v), 3.182446 * std::sqrt(5.0 / 3.0) / 2.0, 1e-12);
  EXPECT_EQ(ci95_halfwidth(std::vector<double>{2.0}), 0.0);
  EXPECT_EQ(critical_value_95(100), 1.959964);
}

TEST(Compare, ReductionPercentages) {
  EXPECT_NEAR(sample_reduction_percent(0.82e6, 1.12e6), 26.8, 0.05);
  EXPECT_NEAR(sample_reduction_percent(0.82e6, 1.92e6), 57.3, 0.05);
  EXPECT_EQ(sample_reduction_percent(5.0, 5.0), 0.0);
  const auto c = compare("catch-sparse", {{"epo", "epo", 1, 1, 0.82e6, 0},
                                          {"ppo", "ppo", 1, 1, 1.12e6, 0}});
  std::ostringstream out;
  write_comparison(out, c);
  EXPECT_NE(out.str().find("ppo,ppo,1,1,1120000,26.8"), std::string::npos) << out.str();
}

// Unresolved; run_experiment resolves.
ExperimentConfig small_experiment(const std::filesystem::path& out, const std::string& mode) {
  std::istringstream in("mode=" + mode +
                        "\nseeds=1-2\nbudget.steps=4000\nnetwork.hidden=8\n"
                        "ppo.rollout_length=250\nepo.pretrain_timesteps=1000\n");
  auto c = apply_assignments(ExperimentConfig{}, parse_config_text(in));
  c.out = out.string();
  return c;
}

TEST(Experiment, WritesRunDirectory) {
  const auto dir = testing::scratch_dir("run_dir");
  const auto r = run_experiment(small_experiment(dir / "epo", "epo"));
  ASSERT_EQ(r.aggregates.size(), 1u);
  for (const char* f : {"config.snapshot", "aggregate.csv", "summary.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / "epo" / f)) << f;
  for (const char* f :
       {"config.snapshot", "history.csv", "metrics.csv", "best.checkpoint", "ledger.json"})
    EXPECT_TRUE(std::filesystem::exists(dir / "epo" / "seed_2" / f)) << f;
  const auto hist = testing::read_file(dir / "epo" / "seed_1" / "history.csv");
  EXPECT_EQ(hist.substr(0, hist.find('\n')),
            "generation,best_fitness,mean_fitness,steps_pretrain,steps_finetune,steps_eval,"
            "steps_total");

  // Aggregate recomputes exactly from the per-seed files.
  const auto from_files = aggregate_from_dir(dir / "epo");
  const auto& a = r.aggregates[0].second;
  EXPECT_EQ(from_files.mean_reward, a.mean_reward);
  EXPECT_EQ(from_files.ci95_halfwidth, a.ci95_halfwidth);
  std::ostringstream csv;
  write_aggregate_csv(csv, from_files);
  EXPECT_EQ(csv.str(), testing::read_file(dir / "epo" / "aggregate.csv"));

  // The checkpoint reloads into the same environment.
  const auto ck = load_checkpoint(dir / "epo" / "seed_1" / "best.checkpoint");
  EXPECT_EQ(ck.environment, "catch-sparse");
}

TEST(Experiment, SnapshotReproducesHistory) {
  const auto dir = testing::scratch_dir("snapshot");
  run_experiment(small_experiment(dir / "a", "epo"));
  auto again = resolve(apply_assignments(ExperimentConfig{}, read_config_file(dir / "a" / "config.snapshot")));
  again.out = (dir / "b").string();
  run_experiment(again);
  for (const char* s : {"seed_1", "seed_2"}) {
    EXPECT_EQ(testing::read_file(dir / "a" / s / "history.csv"),
              testing::read_file(dir / "b" / s / "history.csv"));
    EXPECT_EQ(testing::read_file(dir / "a" / s / "best.checkpoint"),
              testing::read_file(dir / "b" / s / "best.checkpoint"));
  }
  EXPECT_EQ(testing::read_file(dir / "a" / "aggregate.csv"),
            testing::read_file(dir / "b" / "aggregate.csv"));
}

TEST(Experiment, PpoRunChargesBaselineOnly) {
  const auto dir = testing::scratch_dir("ppo");
  run_experiment(small_experiment(dir / "ppo", "ppo"));
  const auto j = nlohmann::json::parse(testing::read_file(dir / "ppo" / "seed_1" / "ledger.json"));
  const auto l = j.at("ledger").get<LedgerCounts>();
  EXPECT_EQ(l.pretrain + l.finetune + l.eval, 0u);
  EXPECT_EQ(l.baseline, 4000u);
  EXPECT_EQ(j.at("final_eval").at("episodes").get<int>(), 20);
}

TEST(Experiment, CompareRunDirectories) {
  const auto dir = testing::scratch_dir("compare");
  run_experiment(small_experiment(dir / "epo", "epo"));
  run_experiment(small_experiment(dir / "pe", "pure-evo"));
  const auto c = compare({dir / "epo", dir / "pe"});
  ASSERT_EQ(c.rows.size(), 2u);
  EXPECT_EQ(c.rows[0].sample_reduction_percent, 0.0);
  EXPECT_EQ(c.rows[1].mode, "pure-evo");
  const auto same = compare({dir / "epo", dir / "epo"});
  EXPECT_EQ(same.rows[1].sample_reduction_percent, 0.0);

  auto other = small_experiment(dir / "cart", "epo");
  other.env = EnvConfig::defaults_for(EnvId::kCatchDense);
  run_experiment(other);
  EXPECT_THROW(compare({dir / "epo", dir / "cart"}), ConfigError);
  EXPECT_THROW(compare({dir / "epo"}), ConfigError);
}

TEST(Experiment, SweepWritesOneDirectoryPerValue) {
  const auto dir = testing::scratch_dir("sweep");
  auto c = small_experiment(dir / "sweep", "sweep-finetune");
  c.sweep_values = {0, 250};
  c.seeds = {1};
  const auto r = run_experiment(c);
  ASSERT_EQ(r.aggregates.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "sweep" / "value_250" / "seed_1" / "history.csv"));
  const auto sweep = testing::read_file(dir / "sweep" / "sweep.csv");
  EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 3);
  const auto snap = read_config_file(dir / "sweep" / "value_250" / "config.snapshot");
  const auto resolved = resolve(apply_assignments(ExperimentConfig{}, snap));
  EXPECT_EQ(resolved.epo.finetune_timesteps, 250);
  EXPECT_EQ(resolved.mode, Mode::kEpo);
}

TEST(Experiment, HypersearchWritesLeaderboard) {
  const auto dir = testing::scratch_dir("search");
  auto c = small_experiment(dir / "hs", "hypersearch");
  c.search_trials = 2;
  c.search_repeats = 1;
  c.epo.budget.env_steps = 1500;
  const auto r = run_experiment(c);
  ASSERT_TRUE(r.leaderboard.has_value());
  EXPECT_EQ(r.leaderboard->rows.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "hs" / "search_results.csv"));
}

TEST(Experiment, TransferSeededRun) {
  const auto dir = testing::scratch_dir("transfer");
  auto src = small_experiment(dir / "dense", "epo");
  src.env = EnvConfig::defaults_for(EnvId::kCatchDense);
  src.seeds = {1};
  run_experiment(src);
  auto tl = small_experiment(dir / "tl", "epo-tl");
  tl.transfer_checkpoint = (dir / "dense" / "seed_1" / "best.checkpoint").string();
  const auto r = run_experiment(tl);
  EXPECT_EQ(r.aggregates[0].second.seeds[0].ledger.pretrain, 0u);

  auto bad = small_experiment(dir / "bad", "epo-tl");
  bad.env = EnvConfig::defaults_for(EnvId::kCartPole);
  bad.transfer_checkpoint = tl.transfer_checkpoint;
  EXPECT_THROW(run_experiment(bad), ContractViolation);
}

#ifdef EPO_CLI_PATH
int cli(const std::string& args) {
  const std::string cmd = std::string(EPO_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

TEST(Cli, ExitCodesAndFlagPrecedence) {
  const auto dir = testing::scratch_dir("cli");
  {
    std::ofstream cfg(dir / "exp.cfg");
    cfg << "mode=pure-evo\nseeds=1\nbudget.steps=999999\nnetwork.hidden=8\n";
  }
  EXPECT_EQ(cli("run --config " + (dir / "exp.cfg").string() + " --budget-steps 600 --out " +
                (dir / "run").string() + " --set evo.population_size=6"),
            0);
  const auto snap = read_config_file(dir / "run" / "config.snapshot");
  const auto c = resolve(apply_assignments(ExperimentConfig{}, snap));
  EXPECT_EQ(c.epo.budget.env_steps, 600u);
  EXPECT_EQ(c.epo.evo.population_size, 6);
  EXPECT_EQ(c.mode, Mode::kPureEvo);

  EXPECT_EQ(cli("run --set no.such.key=1"), 2);
  EXPECT_EQ(cli("run --mode warp"), 2);
  EXPECT_EQ(cli("compare " + (dir / "run").string() + " " + (dir / "run").string()), 0);
  EXPECT_EQ(cli("eval-checkpoint --checkpoint " +
                (dir / "run" / "seed_1" / "best.checkpoint").string()),
            0);
  EXPECT_EQ(cli("eval-checkpoint --checkpoint " + (dir / "missing").string()), 2);
}
#endif

}  // namespace
}  // namespace epo
