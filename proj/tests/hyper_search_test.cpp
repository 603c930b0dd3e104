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
#include <sstream>

#include <gtest/gtest.h>

#include "epo/hyper_search.hpp"

namespace epo {
namespace {

TEST(SearchSpace, DefaultRanges) {
  SearchSpace s;
  EXPECT_EQ(s.mutation_prob_min, 0.1);
  EXPECT_EQ(s.mutation_prob_max, 0.5);
  EXPECT_EQ(s.elite_min, 2);
  EXPECT_EQ(s.elite_max, 6);
  EXPECT_EQ(s.population_min, 6);
  EXPECT_EQ(s.population_max, 16);
}

TEST(SampleConfig, DegenerateSpaceGivesThePoint) {
  SearchSpace s{0.3, 0.3, 3, 3, 8, 8};
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    EXPECT_EQ(sample_config(s, seed), (SearchPoint{0.3, 3, 8}));
}

TEST(SampleConfig, DeterministicAndConstrained) {
  SearchSpace s;
  EXPECT_EQ(sample_config(s, 5), sample_config(s, 5));
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto p = sample_config(s, rng);
    EXPECT_LT(p.elite_count, p.population_size);
    EXPECT_GE(p.mutation_prob, 0.1);
    EXPECT_LE(p.mutation_prob, 0.5);
    EXPECT_GE(p.elite_count, 2);
    EXPECT_LE(p.elite_count, 6);
    EXPECT_GE(p.population_size, 6);
    EXPECT_LE(p.population_size, 16);
  }
}

TEST(SampleConfig, InvalidSpaceThrows) {
  SearchSpace s{0.5, 0.1, 2, 6, 6, 16};
  EXPECT_THROW(s.validate(), ConfigError);
  SearchSpace t{0.1, 0.5, 7, 9, 2, 6};
  EXPECT_THROW(t.validate(), ConfigError);
}

// Deterministic stand-in for an EPO trial: reward peaks at the tabulated
// optimum (0.3, 3, 8) and falls off linearly.
TrialOutcome scripted_trial(const SearchPoint& p, std::uint64_t) {
  const double r = 10.0 - std::abs(p.mutation_prob - 0.3) * 10.0 -
                   std::abs(p.elite_count - 3) - std::abs(p.population_size - 8) * 0.5;
  return {r, 100};
}

TEST(RunSearch, SingleTrial) {
  const auto lb = run_search(SearchSpace{}, 1, 2, 7, scripted_trial);
  ASSERT_EQ(lb.rows.size(), 1u);
  EXPECT_EQ(lb.rows[0].repeats, 2);
  EXPECT_EQ(lb.total_env_steps, 200u);
}

TEST(RunTrials, DominantConfigRanksFirst) {
  const std::vector<SearchPoint> pts{{0.5, 6, 16}, {0.3, 3, 8}, {0.2, 2, 6}};
  const auto lb = run_trials(pts, 3, 1, scripted_trial);
  EXPECT_EQ(lb.rows[0].point, (SearchPoint{0.3, 3, 8}));
  EXPECT_EQ(lb.rows[0].trial, 1);
  for (std::size_t i = 1; i < lb.rows.size(); ++i)
    EXPECT_GE(lb.rows[i - 1].mean_reward, lb.rows[i].mean_reward);
}

TEST(RunTrials, StableTiesAndFailures) {
  const std::vector<SearchPoint> pts{{0.1, 2, 6}, {0.2, 2, 6}, {0.3, 2, 6}, {0.4, 2, 6}};
  const auto lb = run_trials(pts, 2, 1, [](const SearchPoint& p, std::uint64_t) {
    if (p.mutation_prob == 0.2) throw std::runtime_error("diverged");
    return TrialOutcome{1.0, 10};
  });
  ASSERT_EQ(lb.rows.size(), 4u);
  EXPECT_EQ(lb.rows[0].trial, 0);
  EXPECT_EQ(lb.rows[1].trial, 2);
  EXPECT_EQ(lb.rows[2].trial, 3);
  EXPECT_TRUE(lb.rows[3].failed());
  EXPECT_EQ(lb.rows[3].error, "diverged");
  EXPECT_EQ(lb.total_env_steps, 60u);
}

TEST(RunTrials, MeanIsArithmeticMeanAndSeedsShared) {
  std::vector<std::uint64_t> seen;
  const std::vector<SearchPoint> pts{{0.1, 2, 6}, {0.2, 3, 7}};
  const auto lb = run_trials(pts, 3, 9, [&](const SearchPoint& p, std::uint64_t s) {
    seen.push_back(s);
    return TrialOutcome{p.mutation_prob * static_cast<double>(s % 5), 1};
  });
  ASSERT_EQ(seen.size(), 6u);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(seen[k], seen[k + 3]);
  for (const auto& r : lb.rows) {
    double sum = 0.0;
    for (double x : r.rewards) sum += x;
    EXPECT_DOUBLE_EQ(r.mean_reward, sum / 3.0);
  }
}

TEST(RunSearch, ReproducibleAndCsv) {
  const auto a = run_search(SearchSpace{}, 6, 2, 3, scripted_trial);
  const auto b = run_search(SearchSpace{}, 6, 2, 3, scripted_trial);
  std::ostringstream sa, sb;
  write_search_csv(sa, a);
  write_search_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str().substr(0, sa.str().find('\n')),
            "trial,mutation_prob,elite_count,population_size,mean_reward,repeats");
  EXPECT_THROW(run_search(SearchSpace{}, 0, 1, 1, scripted_trial), ContractViolation);
}

}  // namespace
}  // namespace epo
