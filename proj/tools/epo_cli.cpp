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

// epo: command-line front end.
//
//   epo run --config exp.cfg [--mode M] [--env E] [--seeds 1-10]
//           [--budget-steps N] [--budget-seconds S] [--out DIR] [--set k=v]...
//   epo hypersearch (same flags)
//   epo compare DIR DIR...
//   epo eval-checkpoint --checkpoint FILE [--env E] [--episodes N] [--seed S]
//
// Exit status: 0 on success, 2 for configuration errors, 1 for anything else.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "epo/epo.hpp"

namespace {

struct RunFlags {
  std::string config;
  std::optional<std::string> mode, env, seeds, out;
  std::optional<std::uint64_t> budget_steps;
  std::optional<double> budget_seconds;
  std::vector<std::string> sets;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "Config file of key=value lines");
  cmd->add_option("--mode", f.mode, "ppo|epo|epo-nopt|pure-evo|epo-tl|sweep-pretrain|"
                                    "sweep-finetune|hypersearch");
  cmd->add_option("--env", f.env, "cartpole|catch-dense|catch-sparse");
  cmd->add_option("--seeds", f.seeds, "Seed list, e.g. 1-10 or 1,3,5");
  cmd->add_option("--budget-steps", f.budget_steps, "Environment-step budget per run");
  cmd->add_option("--budget-seconds", f.budget_seconds, "Wall-clock budget per run");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--set", f.sets, "Override any config key (key=value)");
}

// Precedence: defaults < config file < named flags < --set.
epo::ExperimentConfig build_config(const RunFlags& f) {
  epo::Assignments a;
  if (!f.config.empty()) a = epo::read_config_file(f.config);
  if (f.mode) a.emplace_back("mode", *f.mode);
  if (f.env) a.emplace_back("env", *f.env);
  if (f.seeds) a.emplace_back("seeds", *f.seeds);
  if (f.budget_steps) a.emplace_back("budget.steps", std::to_string(*f.budget_steps));
  if (f.budget_seconds)
    a.emplace_back("budget.seconds", epo::text::format_double(*f.budget_seconds));
  if (f.out) a.emplace_back("out", *f.out);
  for (const auto& s : f.sets) a.push_back(epo::parse_assignment(s));
  return epo::resolve(epo::apply_assignments(epo::ExperimentConfig{}, a));
}

void print_aggregate(long long value, bool sweep, const epo::Aggregate& a) {
  if (sweep) std::printf("value=%lld ", value);
  std::printf("mode=%s env=%s seeds=%zu mean_reward=%.4f ci95=%.4f best_reward=%.4f "
              "mean_steps=%.0f\n",
              a.mode.c_str(), a.env.c_str(), a.seeds.size(), a.mean_reward,
              a.ci95_halfwidth, a.best_reward, a.mean_steps_total);
}

int run_command(const RunFlags& f, bool force_search) {
  auto c = build_config(f);
  if (force_search && c.mode != epo::Mode::kHypersearch) {
    c.mode = epo::Mode::kHypersearch;
    c = epo::resolve(c);
  }
  const auto result = epo::run_experiment(c);
  const bool sweep =
      c.mode == epo::Mode::kSweepPretrain || c.mode == epo::Mode::kSweepFinetune;
  for (const auto& [v, a] : result.aggregates) print_aggregate(v, sweep, a);
  if (result.leaderboard) epo::write_search_csv(std::cout, *result.leaderboard);
  std::printf("output: %s\n", c.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolutionary policy optimization experiments"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "Run an experiment");
  add_run_flags(run, run_flags);

  RunFlags search_flags;
  auto* search = app.add_subcommand("hypersearch", "Random hyperparameter search");
  add_run_flags(search, search_flags);

  std::vector<std::string> dirs;
  auto* cmp = app.add_subcommand("compare", "Compare finished run directories");
  cmp->add_option("dirs", dirs, "Run directories; the first is the reference method")
      ->required()
      ->expected(2, -1);

  std::string ckpt;
  std::optional<std::string> eval_env;
  int episodes = 20;
  std::uint64_t eval_seed = 0;
  auto* ev = app.add_subcommand("eval-checkpoint", "Evaluate saved weights");
  ev->add_option("--checkpoint", ckpt, "Checkpoint file")->required();
  ev->add_option("--env", eval_env, "Environment (default: the checkpoint's)");
  ev->add_option("--episodes", episodes, "Greedy evaluation episodes");
  ev->add_option("--seed", eval_seed, "Evaluation seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(run_flags, false);
    if (*search) return run_command(search_flags, true);
    if (*cmp) {
      std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
      epo::write_comparison(std::cout, epo::compare(paths));
      return 0;
    }
    if (*ev) {
      const auto c = epo::load_checkpoint(ckpt);
      const auto env_cfg =
          epo::EnvConfig::defaults_for(epo::parse_env_id(eval_env.value_or(c.environment)));
      const auto env = epo::make_environment(env_cfg);
      if (env->observation_size() != c.spec.input_dim ||
          env->action_count() != c.spec.action_count)
        throw epo::ConfigError("checkpoint network does not fit " + env->name());
      const auto r = epo::evaluate_policy(c.params, c.spec, *env, episodes, eval_seed);
      const auto rep = epo::summarize(r.episode_rewards, c.ledger);
      std::printf("env=%s episodes=%zu mean_reward=%.4f best_reward=%.4f eval_steps=%llu "
                  "training_steps=%llu\n",
                  env->name().c_str(), rep.episodes, rep.mean_reward, rep.best_reward,
                  static_cast<unsigned long long>(r.env_steps),
                  static_cast<unsigned long long>(c.ledger.total()));
      return 0;
    }
  } catch (const epo::ConfigError& e) {
    std::fprintf(stderr, "epo: configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "epo: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
