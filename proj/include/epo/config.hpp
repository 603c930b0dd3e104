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

#ifndef EPO_CONFIG_HPP_
#define EPO_CONFIG_HPP_

// Experiment configuration as flat `dotted.key=value` text. Later sources
// override earlier ones: built-in defaults, then the config file, then
// named CLI flags, then `--set key=value`.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "epo/env.hpp"
#include "epo/error.hpp"
#include "epo/hyper_search.hpp"
#include "epo/orchestrator.hpp"
#include "epo/text.hpp"

namespace epo {

enum class Mode {
  kPpo,
  kEpo,
  kEpoNoPretrain,
  kPureEvo,
  kEpoTransfer,
  kSweepPretrain,
  kSweepFinetune,
  kHypersearch,
};

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::kPpo: return "ppo";
    case Mode::kEpo: return "epo";
    case Mode::kEpoNoPretrain: return "epo-nopt";
    case Mode::kPureEvo: return "pure-evo";
    case Mode::kEpoTransfer: return "epo-tl";
    case Mode::kSweepPretrain: return "sweep-pretrain";
    case Mode::kSweepFinetune: return "sweep-finetune";
    case Mode::kHypersearch: return "hypersearch";
  }
  return "unknown";
}

inline Mode parse_mode(std::string_view s) {
  for (Mode m : {Mode::kPpo, Mode::kEpo, Mode::kEpoNoPretrain, Mode::kPureEvo,
                 Mode::kEpoTransfer, Mode::kSweepPretrain, Mode::kSweepFinetune,
                 Mode::kHypersearch})
    if (to_string(m) == s) return m;
  throw ConfigError("'mode': unknown mode '" + std::string(s) +
                    "' (expected ppo, epo, epo-nopt, pure-evo, epo-tl, "
                    "sweep-pretrain, sweep-finetune or hypersearch)");
}

/// "1-10", "1,4,7" or a mix such as "1-3,9".
inline std::vector<std::uint64_t> parse_seeds(std::string_view s) {
  std::vector<std::uint64_t> out;
  for (auto part : text::split(s, ',')) {
    part = text::trim(part);
    if (part.empty()) continue;
    const auto dash = part.find('-');
    if (dash == std::string_view::npos) {
      out.push_back(text::parse_int<std::uint64_t>(part, "seeds"));
      continue;
    }
    const auto lo = text::parse_int<std::uint64_t>(part.substr(0, dash), "seeds");
    const auto hi = text::parse_int<std::uint64_t>(part.substr(dash + 1), "seeds");
    if (lo > hi) throw ConfigError("'seeds': range " + std::string(part) + " is reversed");
    for (auto v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw ConfigError("'seeds': no seeds given");
  return out;
}

struct ExperimentConfig {
  Mode mode = Mode::kEpo;
  EnvConfig env = EnvConfig::defaults_for(EnvId::kCatchSparse);
  EpoConfig epo;
  std::vector<std::uint64_t> seeds{1};
  std::string out = "runs/experiment";
  int report_episodes = 20;
  std::string transfer_checkpoint;
  std::vector<long long> sweep_values;
  SearchSpace search;
  int search_trials = 10;
  int search_repeats = 3;
  std::uint64_t search_seed = 0;
};

namespace detail {

struct ConfigKey {
  std::string name;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

inline std::string fmt(double v) { return text::format_double(v); }

// Every recognised key, in snapshot order.
inline const std::vector<ConfigKey>& config_keys() {
  using C = ExperimentConfig;
  using SV = std::string_view;
#define EPO_DOUBLE_KEY(key, field) \
  ConfigKey{key, [](C& c, SV v) { c.field = text::parse_double(v, key); }, \
            [](const C& c) { return fmt(c.field); }}
#define EPO_INT_KEY(key, field, type) \
  ConfigKey{key, [](C& c, SV v) { c.field = text::parse_int<type>(v, key); }, \
            [](const C& c) { return std::to_string(c.field); }}
#define EPO_BOOL_KEY(key, field) \
  ConfigKey{key, [](C& c, SV v) { c.field = text::parse_bool(v, key); }, \
            [](const C& c) { return std::string(c.field ? "true" : "false"); }}
  static const std::vector<ConfigKey> keys = {
      {"mode", [](C& c, SV v) { c.mode = parse_mode(text::trim(v)); },
       [](const C& c) { return std::string(to_string(c.mode)); }},
      {"env",
       [](C& c, SV v) {
         // Switching environment resets its defaults (horizon, no-op range).
         const auto id = parse_env_id(text::trim(v));
         if (id != c.env.id) {
           const auto seed = c.env.seed;
           c.env = EnvConfig::defaults_for(id);
           c.env.seed = seed;
         }
       },
       [](const C& c) { return to_string(c.env.id); }},
      EPO_INT_KEY("env.horizon", env.horizon, int),
      EPO_INT_KEY("env.seed", env.seed, std::uint64_t),
      EPO_INT_KEY("env.noop_min", env.noop_min, int),
      EPO_INT_KEY("env.noop_max", env.noop_max, int),
      EPO_INT_KEY("env.grid_rows", env.grid_rows, int),
      EPO_INT_KEY("env.grid_cols", env.grid_cols, int),
      {"seeds", [](C& c, SV v) { c.seeds = parse_seeds(v); },
       [](const C& c) { return join(c.seeds); }},
      {"out", [](C& c, SV v) { c.out = std::string(text::trim(v)); },
       [](const C& c) { return c.out; }},
      EPO_INT_KEY("budget.steps", epo.budget.env_steps, std::uint64_t),
      EPO_DOUBLE_KEY("budget.seconds", epo.budget.wall_seconds),
      {"network.hidden",
       [](C& c, SV v) {
         c.epo.hidden.clear();
         for (auto h : text::split(v, ','))
           c.epo.hidden.push_back(text::parse_int<std::size_t>(h, "network.hidden"));
       },
       [](const C& c) { return join(c.epo.hidden); }},
      EPO_DOUBLE_KEY("ppo.clip", epo.ppo.clip),
      EPO_DOUBLE_KEY("ppo.gamma", epo.ppo.gamma),
      EPO_DOUBLE_KEY("ppo.gae_lambda", epo.ppo.gae_lambda),
      EPO_INT_KEY("ppo.epochs", epo.ppo.epochs, int),
      EPO_INT_KEY("ppo.minibatch_size", epo.ppo.minibatch_size, int),
      EPO_INT_KEY("ppo.rollout_length", epo.ppo.rollout_length, int),
      EPO_DOUBLE_KEY("ppo.value_coef", epo.ppo.value_coef),
      EPO_DOUBLE_KEY("ppo.entropy_coef", epo.ppo.entropy_coef),
      EPO_DOUBLE_KEY("ppo.learning_rate", epo.ppo.learning_rate),
      EPO_DOUBLE_KEY("ppo.max_grad_norm", epo.ppo.max_grad_norm),
      EPO_BOOL_KEY("ppo.normalize_advantages", epo.ppo.normalize_advantages),
      EPO_DOUBLE_KEY("evo.mutation_prob", epo.evo.mutation_prob),
      EPO_INT_KEY("evo.elite_count", epo.evo.elite_count, int),
      EPO_INT_KEY("evo.population_size", epo.evo.population_size, int),
      EPO_DOUBLE_KEY("evo.epsilon", epo.evo.epsilon),
      EPO_DOUBLE_KEY("evo.scaling_min", epo.evo.scaling_min),
      EPO_DOUBLE_KEY("evo.scaling_max", epo.evo.scaling_max),
      {"evo.mutation_sigma_mode",
       [](C& c, SV v) { c.epo.evo.sigma_mode = parse_sigma_mode(text::trim(v)); },
       [](const C& c) { return std::string(to_string(c.epo.evo.sigma_mode)); }},
      EPO_INT_KEY("epo.pretrain_timesteps", epo.pretrain_timesteps, long long),
      EPO_INT_KEY("epo.finetune_timesteps", epo.finetune_timesteps, long long),
      EPO_INT_KEY("epo.fitness_episodes", epo.fitness_episodes, int),
      EPO_INT_KEY("epo.initial_clones", epo.initial_clones, int),
      {"epo.eval_seed_mode",
       [](C& c, SV v) { c.epo.eval_seed_mode = parse_eval_seed_mode(text::trim(v)); },
       [](const C& c) { return std::string(to_string(c.epo.eval_seed_mode)); }},
      EPO_BOOL_KEY("epo.eval_stochastic", epo.eval_stochastic),
      EPO_INT_KEY("workers", epo.workers, int),
      EPO_INT_KEY("report.eval_episodes", report_episodes, int),
      {"transfer.checkpoint",
       [](C& c, SV v) { c.transfer_checkpoint = std::string(text::trim(v)); },
       [](const C& c) { return c.transfer_checkpoint; }},
      {"sweep.values",
       [](C& c, SV v) {
         c.sweep_values.clear();
         for (auto x : text::split(v, ','))
           if (!text::trim(x).empty())
             c.sweep_values.push_back(text::parse_int<long long>(x, "sweep.values"));
       },
       [](const C& c) { return join(c.sweep_values); }},
      EPO_DOUBLE_KEY("search.mutation_prob_min", search.mutation_prob_min),
      EPO_DOUBLE_KEY("search.mutation_prob_max", search.mutation_prob_max),
      EPO_INT_KEY("search.elite_min", search.elite_min, int),
      EPO_INT_KEY("search.elite_max", search.elite_max, int),
      EPO_INT_KEY("search.population_min", search.population_min, int),
      EPO_INT_KEY("search.population_max", search.population_max, int),
      EPO_INT_KEY("search.trials", search_trials, int),
      EPO_INT_KEY("search.repeats", search_repeats, int),
      EPO_INT_KEY("search.seed", search_seed, std::uint64_t),
  };
#undef EPO_DOUBLE_KEY
#undef EPO_INT_KEY
#undef EPO_BOOL_KEY
  return keys;
}

inline const ConfigKey& find_key(std::string_view name) {
  for (const auto& k : config_keys())
    if (k.name == name) return k;
  throw ConfigError("unknown configuration key '" + std::string(name) + "'");
}

}  // namespace detail

/// Ordered key/value assignments, as read from a file or the command line.
using Assignments = std::vector<std::pair<std::string, std::string>>;

inline std::pair<std::string, std::string> parse_assignment(std::string_view line) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("expected key=value, got '" + std::string(line) + "'");
  return {std::string(text::trim(line.substr(0, eq))),
          std::string(text::trim(line.substr(eq + 1)))};
}

/// Blank lines and lines starting with '#' are ignored.
inline Assignments parse_config_text(std::istream& in) {
  Assignments out;
  std::string line;
  while (std::getline(in, line)) {
    const auto t = text::trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.push_back(parse_assignment(t));
  }
  return out;
}

inline Assignments read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  return parse_config_text(in);
}

/// Applies assignments on top of `base`. `env` is applied first so that
/// switching environments does not clobber explicit env.* values.
inline ExperimentConfig apply_assignments(ExperimentConfig base, const Assignments& assignments) {
  for (const auto& [k, v] : assignments)
    if (k == "env") detail::find_key(k).set(base, v);
  for (const auto& [k, v] : assignments)
    if (k != "env") detail::find_key(k).set(base, v);
  return base;
}

/// Forces mode-implied values and validates everything a run needs, so a
/// bad configuration fails before any environment step.
inline ExperimentConfig resolve(ExperimentConfig c) {
  switch (c.mode) {
    case Mode::kPureEvo:
      c.epo.pretrain_timesteps = 0;
      c.epo.finetune_timesteps = 0;
      break;
    case Mode::kEpoNoPretrain:
    case Mode::kEpoTransfer:
      c.epo.pretrain_timesteps = 0;
      break;
    default:
      break;
  }
  c.env.validate();
  c.epo.validate();
  if (c.report_episodes < 1) throw ConfigError("'report.eval_episodes' must be >= 1");
  if (c.out.empty()) throw ConfigError("'out' must name an output directory");
  if (c.mode == Mode::kPpo && c.epo.budget.env_steps > 0 &&
      c.epo.budget.env_steps < static_cast<std::uint64_t>(c.epo.ppo.rollout_length))
    throw ConfigError("'budget.steps' must cover at least one ppo.rollout_length");
  if (c.mode == Mode::kEpoTransfer && c.transfer_checkpoint.empty())
    throw ConfigError("'transfer.checkpoint' is required for mode epo-tl");
  if ((c.mode == Mode::kSweepPretrain || c.mode == Mode::kSweepFinetune) &&
      c.sweep_values.empty())
    throw ConfigError("'sweep.values' is required for sweep modes");
  for (long long v : c.sweep_values) {
    if (v < 0) throw ConfigError("'sweep.values' must be non-negative");
    if (c.mode == Mode::kSweepPretrain && v > 0 && v < c.epo.ppo.rollout_length)
      throw ConfigError("'sweep.values': pre-train value " + std::to_string(v) +
                        " is below one ppo.rollout_length");
  }
  if (c.mode == Mode::kHypersearch) {
    c.search.validate();
    if (c.search_trials < 1) throw ConfigError("'search.trials' must be >= 1");
    if (c.search_repeats < 1) throw ConfigError("'search.repeats' must be >= 1");
  }
  return c;
}

/// Every key with its resolved value, one per line.
inline void write_snapshot(std::ostream& out, const ExperimentConfig& c) {
  for (const auto& k : detail::config_keys()) out << k.name << '=' << k.get(c) << '\n';
}

inline std::string snapshot_string(const ExperimentConfig& c) {
  std::ostringstream s;
  write_snapshot(s, c);
  return s.str();
}

}  // namespace epo

#endif  // EPO_CONFIG_HPP_
