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

#ifndef EPO_HYPER_SEARCH_HPP_
#define EPO_HYPER_SEARCH_HPP_

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "epo/error.hpp"
#include "epo/evo.hpp"
#include "epo/rng.hpp"
#include "epo/text.hpp"

namespace epo {

/// Ranges for the three searched hyperparameters. Defaults are the
/// published search ranges.
struct SearchSpace {
  double mutation_prob_min = 0.1;
  double mutation_prob_max = 0.5;
  int elite_min = 2;
  int elite_max = 6;
  int population_min = 6;
  int population_max = 16;

  void validate() const {
    if (mutation_prob_min < 0.0 || mutation_prob_max > 1.0 ||
        mutation_prob_min > mutation_prob_max)
      throw ConfigError("search mutation_prob range must lie in [0, 1] and be ordered");
    if (elite_min < 1 || elite_min > elite_max)
      throw ConfigError("search elite range must be ordered and >= 1");
    if (population_min > population_max)
      throw ConfigError("search population range must be ordered");
    if (elite_min >= population_max)
      throw ConfigError("search space has no point with elite_count < population_size");
  }
};

/// The three searched values, to be merged into an EvoConfig.
struct SearchPoint {
  double mutation_prob = 0.0;
  int elite_count = 0;
  int population_size = 0;

  EvoConfig apply(EvoConfig base) const {
    base.mutation_prob = mutation_prob;
    base.elite_count = elite_count;
    base.population_size = population_size;
    return base;
  }
  friend bool operator==(const SearchPoint&, const SearchPoint&) = default;
};

/// Uniform draw from the space, redrawn until elite_count < population_size.
inline SearchPoint sample_config(const SearchSpace& space, Rng& rng) {
  space.validate();
  for (;;) {
    SearchPoint p;
    p.mutation_prob = space.mutation_prob_min == space.mutation_prob_max
                          ? space.mutation_prob_min
                          : rng.uniform(space.mutation_prob_min, space.mutation_prob_max);
    p.elite_count = static_cast<int>(rng.uniform_int(space.elite_min, space.elite_max));
    p.population_size =
        static_cast<int>(rng.uniform_int(space.population_min, space.population_max));
    if (p.elite_count < p.population_size) return p;
  }
}

inline SearchPoint sample_config(const SearchSpace& space, std::uint64_t seed) {
  Rng rng(seed);
  return sample_config(space, rng);
}

struct TrialOutcome {
  double reward = 0.0;
  std::uint64_t env_steps = 0;
};

/// Runs one repeat of one configuration. The repeat seed is shared by all
/// configurations so they are compared on the same seeds.
using TrialRunner = std::function<TrialOutcome(const SearchPoint&, std::uint64_t repeat_seed)>;

struct TrialResult {
  int trial = 0;
  SearchPoint point;
  double mean_reward = 0.0;
  int repeats = 0;
  std::vector<double> rewards;
  std::uint64_t env_steps = 0;
  std::string error;  // non-empty if a repeat threw

  bool failed() const { return !error.empty(); }
};

struct Leaderboard {
  std::vector<TrialResult> rows;  // best first
  std::uint64_t total_env_steps = 0;
};

inline std::uint64_t repeat_seed(std::uint64_t search_seed, int repeat) {
  return derive_seed(search_seed, {0x5EA4C8, static_cast<std::uint64_t>(repeat)});
}

/// Evaluates the given points in order and ranks them by mean reward,
/// descending. Ties keep trial order; failed trials sort last.
inline Leaderboard run_trials(const std::vector<SearchPoint>& points, int repeats,
                              std::uint64_t seed, const TrialRunner& runner) {
  if (repeats < 1) throw ContractViolation("run_trials: repeats must be >= 1");
  Leaderboard lb;
  for (std::size_t t = 0; t < points.size(); ++t) {
    TrialResult r;
    r.trial = static_cast<int>(t);
    r.point = points[t];
    try {
      for (int k = 0; k < repeats; ++k) {
        const auto o = runner(points[t], repeat_seed(seed, k));
        r.rewards.push_back(o.reward);
        r.env_steps += o.env_steps;
      }
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    r.repeats = static_cast<int>(r.rewards.size());
    r.mean_reward = r.rewards.empty()
                        ? -std::numeric_limits<double>::infinity()
                        : std::accumulate(r.rewards.begin(), r.rewards.end(), 0.0) /
                              static_cast<double>(r.rewards.size());
    lb.total_env_steps += r.env_steps;
    lb.rows.push_back(std::move(r));
  }
  std::ranges::stable_sort(lb.rows, [](const TrialResult& a, const TrialResult& b) {
    if (a.failed() != b.failed()) return !a.failed();
    return a.mean_reward > b.mean_reward;
  });
  return lb;
}

/// Random search: `trials` points drawn from `space`, each run `repeats`
/// times.
inline Leaderboard run_search(const SearchSpace& space, int trials, int repeats,
                              std::uint64_t seed, const TrialRunner& runner) {
  if (trials < 1 || repeats < 1)
    throw ContractViolation("run_search: trials and repeats must be >= 1");
  Rng rng(derive_seed(seed, {0x5A3B1E}));
  std::vector<SearchPoint> points;
  for (int t = 0; t < trials; ++t) points.push_back(sample_config(space, rng));
  return run_trials(points, repeats, seed, runner);
}

/// search_results.csv, leaderboard order.
inline void write_search_csv(std::ostream& out, const Leaderboard& lb) {
  out << "trial,mutation_prob,elite_count,population_size,mean_reward,repeats\n";
  for (const auto& r : lb.rows)
    out << r.trial << ',' << text::format_double(r.point.mutation_prob) << ','
        << r.point.elite_count << ',' << r.point.population_size << ','
        << text::format_double(r.mean_reward) << ',' << r.repeats << '\n';
}

}  // namespace epo

#endif  // EPO_HYPER_SEARCH_HPP_
