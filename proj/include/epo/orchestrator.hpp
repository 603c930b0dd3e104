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

#ifndef EPO_ORCHESTRATOR_HPP_
#define EPO_ORCHESTRATOR_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "epo/checkpoint.hpp"
#include "epo/env.hpp"
#include "epo/error.hpp"
#include "epo/evo.hpp"
#include "epo/ledger.hpp"
#include "epo/nn.hpp"
#include "epo/ppo.hpp"
#include "epo/rng.hpp"

namespace epo {

enum class Lineage { kInitialClone, kEliteCarryover, kMutatedOffspring, kFinetunedOffspring };

inline std::string_view to_string(Lineage l) {
  switch (l) {
    case Lineage::kInitialClone: return "initial-clone";
    case Lineage::kEliteCarryover: return "elite-carryover";
    case Lineage::kMutatedOffspring: return "mutated-offspring";
    case Lineage::kFinetunedOffspring: return "finetuned-offspring";
  }
  return "unknown";
}

struct PopulationMember {
  std::uint64_t id = 0;
  ParameterVector params;
  FitnessRecord fitness;
  std::vector<std::uint64_t> parents;
  Lineage lineage = Lineage::kInitialClone;
};

using Population = std::vector<PopulationMember>;

enum class EvalSeedMode {
  kSharedPerGeneration,  // all members of a generation see the same episodes
  kFixed,                // the same episodes in every generation
};

inline EvalSeedMode parse_eval_seed_mode(std::string_view s) {
  if (s == "shared-per-generation") return EvalSeedMode::kSharedPerGeneration;
  if (s == "fixed") return EvalSeedMode::kFixed;
  throw ConfigError("eval_seed_mode must be 'shared-per-generation' or 'fixed', got '" +
                    std::string(s) + "'");
}

inline std::string_view to_string(EvalSeedMode m) {
  return m == EvalSeedMode::kFixed ? "fixed" : "shared-per-generation";
}

/// Zero means "no limit" for either field; at least one must be set.
struct Budget {
  std::uint64_t env_steps = 0;
  double wall_seconds = 0.0;

  friend bool operator==(const Budget&, const Budget&) = default;
};

struct EpoConfig {
  EvoConfig evo;
  PPOConfig ppo;
  std::vector<std::size_t> hidden{64, 64};
  long long pretrain_timesteps = 30000;
  long long finetune_timesteps = 500;
  int fitness_episodes = 5;
  int initial_clones = 2;
  Budget budget{200000, 0.0};
  EvalSeedMode eval_seed_mode = EvalSeedMode::kSharedPerGeneration;
  bool eval_stochastic = false;
  int workers = 1;

  void validate() const {
    evo.validate();
    ppo.validate();
    if (pretrain_timesteps < 0 || finetune_timesteps < 0)
      throw ConfigError("pretrain/finetune timesteps must be >= 0");
    if (pretrain_timesteps > 0 && pretrain_timesteps < ppo.rollout_length)
      throw ConfigError("epo.pretrain_timesteps must be 0 or at least ppo.rollout_length");
    if (fitness_episodes < 1) throw ConfigError("epo.fitness_episodes must be >= 1");
    if (initial_clones < 1) throw ConfigError("epo.initial_clones must be >= 1");
    if (budget.env_steps == 0 && !(budget.wall_seconds > 0.0))
      throw ConfigError("a positive step or wall-clock budget is required");
    if (workers < 1) throw ConfigError("workers must be >= 1");
  }

  NetworkSpec network_for(const Environment& env) const {
    return NetworkSpec{env.observation_size(), hidden, env.action_count()};
  }

  /// Fine-tuning collects its whole budget as one rollout.
  PPOConfig finetune_ppo() const {
    PPOConfig c = ppo;
    c.rollout_length = static_cast<int>(finetune_timesteps);
    return c;
  }
};

struct GenerationReport {
  int generation = 0;
  std::vector<double> fitness;  // raw, in population order
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  int elites = 0;
  int mutated = 0;
  int finetuned = 0;
  LedgerCounts ledger;  // cumulative, after the generation
  LedgerCounts delta;   // spent during the generation
  bool halted = false;  // budget ran out inside this generation
};

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  const auto count = std::min<std::size_t>(n, static_cast<std::size_t>(workers));
  for (std::size_t w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Tracks the run budget. Step budgets are exact; wall-clock is only
/// consulted when configured.
class BudgetClock {
 public:
  explicit BudgetClock(Budget budget)
      : budget_(budget), start_(std::chrono::steady_clock::now()) {}

  bool steps_exhausted(std::uint64_t steps) const {
    return budget_.env_steps > 0 && steps >= budget_.env_steps;
  }
  bool time_exhausted() const {
    return budget_.wall_seconds > 0.0 && elapsed() >= budget_.wall_seconds;
  }
  bool exhausted(std::uint64_t steps) const {
    return steps_exhausted(steps) || time_exhausted();
  }
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }
  const Budget& budget() const { return budget_; }

 private:
  Budget budget_;
  std::chrono::steady_clock::time_point start_;
};

/// Pre-trains a base model (unless pretrain_timesteps is 0) and clones it
/// `initial_clones` times.
inline Population initialize(const EpoConfig& config, const Environment& env,
                             std::uint64_t seed, SampleLedger& ledger) {
  config.validate();
  const NetworkSpec spec = config.network_for(env);
  Rng init_rng(derive_seed(seed, {1}));
  ParameterVector base = initialize_parameters(spec, init_rng);
  if (config.pretrain_timesteps > 0)
    base = train(std::move(base), spec, env, config.pretrain_timesteps, config.ppo,
                 derive_seed(seed, {2}), ledger, StepCategory::kPretrain);
  Population pop;
  for (int i = 0; i < config.initial_clones; ++i)
    pop.push_back({static_cast<std::uint64_t>(i), base, {}, {}, Lineage::kInitialClone});
  return pop;
}

/// Population cloned from saved weights instead of fresh pre-training.
inline Population load_population_seed(const Checkpoint& checkpoint,
                                       const EpoConfig& config,
                                       const Environment& env) {
  const NetworkSpec want = config.network_for(env);
  if (!(checkpoint.spec == want))
    throw ContractViolation(
        "checkpoint network (input " + std::to_string(checkpoint.spec.input_dim) +
        ", actions " + std::to_string(checkpoint.spec.action_count) +
        ") does not match " + env.name() + " (input " +
        std::to_string(want.input_dim) + ", actions " +
        std::to_string(want.action_count) + "): dimension mismatch");
  Population pop;
  for (int i = 0; i < config.initial_clones; ++i)
    pop.push_back({static_cast<std::uint64_t>(i), checkpoint.params, {}, {},
                   Lineage::kInitialClone});
  return pop;
}

inline Population load_population_seed(const std::filesystem::path& path,
                                       const EpoConfig& config,
                                       const Environment& env) {
  return load_population_seed(load_checkpoint(path), config, env);
}

struct GenerationOutcome {
  Population next;
  GenerationReport report;
  // Highest-fitness member of the population as evaluated this generation.
  PopulationMember best;
};

/// Seeds for the episodes every member is evaluated on in `generation`.
inline std::uint64_t evaluation_seed(const EpoConfig& config, std::uint64_t run_seed,
                                     int generation) {
  const auto g = config.eval_seed_mode == EvalSeedMode::kFixed
                     ? 0ULL
                     : static_cast<std::uint64_t>(generation);
  return derive_seed(run_seed, {3, g});
}

/// One pass of: evaluate everyone, keep the elites, breed offspring from
/// elite pairs until the population is back to P. If the budget runs out
/// after evaluation no offspring are made; if it runs out while breeding,
/// the offspring already planned are finished and the rest skipped.
inline GenerationOutcome run_generation(const Population& population,
                                        const EpoConfig& config,
                                        const Environment& env,
                                        std::uint64_t run_seed, int generation,
                                        std::uint64_t& next_id,
                                        SampleLedger& ledger,
                                        const BudgetClock& clock) {
  if (population.empty()) throw ContractViolation("run_generation: empty population");
  const NetworkSpec spec = config.network_for(env);
  const LedgerCounts before = ledger.snapshot();

  // Evaluate.
  Population pop = population;
  const auto eval_seed = evaluation_seed(config, run_seed, generation);
  detail::parallel_for(pop.size(), config.workers, [&](std::size_t i) {
    const auto r = evaluate_policy(pop[i].params, spec, env, config.fitness_episodes,
                                   eval_seed, config.eval_stochastic);
    ledger.charge(StepCategory::kEval, r.env_steps);
    pop[i].fitness = {r.mean_reward, 0.0, config.fitness_episodes, r.env_steps};
  });
  std::vector<FitnessRecord> records;
  for (const auto& m : pop) records.push_back(m.fitness);
  shift_fitness(records);
  std::vector<double> raw;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    pop[i].fitness = records[i];
    raw.push_back(records[i].raw);
  }

  GenerationOutcome out;
  auto& rep = out.report;
  rep.generation = generation;
  rep.fitness = raw;
  rep.best_fitness = *std::ranges::max_element(raw);
  rep.mean_fitness = std::accumulate(raw.begin(), raw.end(), 0.0) /
                     static_cast<double>(raw.size());

  const auto elite_idx = select_elites(raw, config.evo.elite_count);
  out.best = pop[elite_idx.front()];
  rep.elites = static_cast<int>(elite_idx.size());
  for (std::size_t i : elite_idx) {
    PopulationMember e = pop[i];
    e.parents = {e.id};
    e.lineage = Lineage::kEliteCarryover;
    out.next.push_back(std::move(e));
  }

  if (clock.exhausted(ledger.total())) {
    // No reproduction: carry the evaluated population forward unchanged.
    out.next = pop;
    rep.halted = true;
    rep.ledger = ledger.snapshot();
    rep.delta = rep.ledger - before;
    return out;
  }

  // Plan offspring. Every random choice for offspring k comes from its own
  // seed, so construction order does not affect the result.
  struct Plan {
    std::size_t p1, p2;
    bool mutate;
    std::uint64_t seed;
  };
  const auto n_offspring = static_cast<std::size_t>(
      std::max(0, config.evo.population_size - rep.elites));
  const auto finetune_cost =
      config.finetune_timesteps > 0 ? static_cast<std::uint64_t>(config.finetune_timesteps)
                                    : 0ULL;
  std::vector<Plan> plans;
  std::uint64_t projected = ledger.total();
  for (std::size_t k = 0; k < n_offspring; ++k) {
    const auto seed = derive_seed(run_seed, {4, static_cast<std::uint64_t>(generation), k});
    Rng rng(seed);
    const auto ne = static_cast<std::int64_t>(elite_idx.size());
    std::size_t a = static_cast<std::size_t>(rng.uniform_int(0, ne - 1));
    std::size_t b = a;
    if (ne >= 2) {
      b = static_cast<std::size_t>(rng.uniform_int(0, ne - 2));
      if (b >= a) ++b;
    }
    const bool mutate = rng.bernoulli(config.evo.mutation_prob);
    plans.push_back({a, b, mutate, seed});
    if (!mutate) projected += finetune_cost;
    if (clock.steps_exhausted(projected)) break;
  }

  std::vector<std::optional<PopulationMember>> offspring(plans.size());
  const PPOConfig ft_config = config.finetune_ppo();
  detail::parallel_for(plans.size(), config.workers, [&](std::size_t k) {
    if (clock.time_exhausted()) return;
    const auto& plan = plans[k];
    const auto& p1 = out.next[plan.p1];
    const auto& p2 = out.next[plan.p2];
    const double f1 = p1.fitness.shifted, f2 = p2.fitness.shifted;
    const double alpha = crossover_alpha(f1, f2, config.evo.epsilon);
    PopulationMember child;
    child.id = next_id + k;
    child.parents = {p1.id, p2.id};
    child.params = crossover(p1.params, p2.params, alpha);
    if (plan.mutate) {
      const double s = mutation_scaling(f1, f2, config.evo.epsilon,
                                        config.evo.scaling_min, config.evo.scaling_max);
      child.params = mutate(child.params, s, derive_seed(plan.seed, {1}),
                            config.evo.sigma_mode, config.evo.scaling_min,
                            config.evo.scaling_max);
      child.lineage = Lineage::kMutatedOffspring;
    } else {
      // With fine-tuning disabled this is a plain crossover child.
      if (config.finetune_timesteps > 0)
        child.params = train(std::move(child.params), spec, env,
                             config.finetune_timesteps, ft_config,
                             derive_seed(plan.seed, {2}), ledger,
                             StepCategory::kFinetune);
      child.lineage = Lineage::kFinetunedOffspring;
    }
    offspring[k] = std::move(child);
  });
  next_id += plans.size();

  for (auto& o : offspring) {
    if (!o) continue;
    if (o->lineage == Lineage::kMutatedOffspring) ++rep.mutated;
    else ++rep.finetuned;
    out.next.push_back(std::move(*o));
  }
  rep.halted = clock.exhausted(ledger.total()) ||
               out.next.size() < static_cast<std::size_t>(config.evo.population_size);
  rep.ledger = ledger.snapshot();
  rep.delta = rep.ledger - before;
  return out;
}

struct RunResult {
  PopulationMember best;
  std::vector<GenerationReport> history;
  LedgerCounts ledger;
  Population final_population;
};

struct RunOptions {
  // Start from this population instead of initialize() (transfer seeding).
  std::optional<Population> seed_population;
  MetricsStream* metrics = nullptr;
  // Called after every generation.
  std::function<void(const GenerationReport&)> on_generation;
};

/// Initialize, then generations until the budget is spent.
inline RunResult run(const EpoConfig& config, const Environment& env,
                     std::uint64_t seed, SampleLedger& ledger,
                     const RunOptions& options = {}) {
  config.validate();
  BudgetClock clock(config.budget);
  Population pop = options.seed_population
                       ? *options.seed_population
                       : initialize(config, env, seed, ledger);
  std::uint64_t next_id = 0;
  for (const auto& m : pop) next_id = std::max(next_id, m.id + 1);

  RunResult result;
  for (int gen = 0;; ++gen) {
    auto outcome = run_generation(pop, config, env, seed, gen, next_id, ledger, clock);
    if (options.metrics) {
      const auto steps = outcome.report.ledger.total();
      options.metrics->record(steps, "best_fitness", outcome.report.best_fitness);
      options.metrics->record(steps, "mean_fitness", outcome.report.mean_fitness);
    }
    if (options.on_generation) options.on_generation(outcome.report);
    result.best = std::move(outcome.best);
    result.history.push_back(outcome.report);
    pop = std::move(outcome.next);
    if (outcome.report.halted) break;
  }
  result.ledger = ledger.snapshot();
  result.final_population = std::move(pop);
  return result;
}

inline RunResult run(const EpoConfig& config, const Environment& env,
                     std::uint64_t seed, const RunOptions& options = {}) {
  SampleLedger ledger;
  return run(config, env, seed, ledger, options);
}

}  // namespace epo

#endif  // EPO_ORCHESTRATOR_HPP_
