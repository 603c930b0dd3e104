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

#ifndef EPO_LEDGER_HPP_
#define EPO_LEDGER_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "epo/error.hpp"

namespace epo {

enum class StepCategory { kPretrain, kFinetune, kEval, kBaseline };

inline std::string_view to_string(StepCategory c) {
  switch (c) {
    case StepCategory::kPretrain: return "pretrain";
    case StepCategory::kFinetune: return "finetune";
    case StepCategory::kEval: return "eval";
    case StepCategory::kBaseline: return "baseline";
  }
  return "unknown";
}

inline StepCategory parse_category(std::string_view s) {
  if (s == "pretrain") return StepCategory::kPretrain;
  if (s == "finetune") return StepCategory::kFinetune;
  if (s == "eval") return StepCategory::kEval;
  if (s == "baseline") return StepCategory::kBaseline;
  throw ContractViolation("unknown ledger category '" + std::string(s) + "'");
}

/// Plain snapshot of the ledger counters.
struct LedgerCounts {
  std::uint64_t pretrain = 0;
  std::uint64_t finetune = 0;
  std::uint64_t eval = 0;
  std::uint64_t baseline = 0;

  std::uint64_t total() const { return pretrain + finetune + eval + baseline; }

  LedgerCounts operator-(const LedgerCounts& o) const {
    return {pretrain - o.pretrain, finetune - o.finetune, eval - o.eval,
            baseline - o.baseline};
  }
  friend bool operator==(const LedgerCounts&, const LedgerCounts&) = default;
};

inline void to_json(nlohmann::json& j, const LedgerCounts& c) {
  j = nlohmann::json{{"steps_pretrain", c.pretrain},
                     {"steps_finetune", c.finetune},
                     {"steps_eval", c.eval},
                     {"steps_baseline", c.baseline},
                     {"steps_total", c.total()}};
}

inline void from_json(const nlohmann::json& j, LedgerCounts& c) {
  j.at("steps_pretrain").get_to(c.pretrain);
  j.at("steps_finetune").get_to(c.finetune);
  j.at("steps_eval").get_to(c.eval);
  j.at("steps_baseline").get_to(c.baseline);
}

/// Exact environment-step accounting by category. charge() is the only
/// mutator and is safe to call from any number of threads.
class SampleLedger {
 public:
  SampleLedger() = default;
  explicit SampleLedger(const LedgerCounts& start) {
    counters_[0] = start.pretrain;
    counters_[1] = start.finetune;
    counters_[2] = start.eval;
    counters_[3] = start.baseline;
  }
  SampleLedger(const SampleLedger& other) : SampleLedger(other.snapshot()) {}
  SampleLedger& operator=(const SampleLedger& other) {
    const auto s = other.snapshot();
    counters_[0] = s.pretrain;
    counters_[1] = s.finetune;
    counters_[2] = s.eval;
    counters_[3] = s.baseline;
    return *this;
  }

  void charge(StepCategory category, std::uint64_t steps) {
    counters_[static_cast<std::size_t>(category)].fetch_add(
        steps, std::memory_order_relaxed);
  }
  void charge(std::string_view category, std::uint64_t steps) {
    charge(parse_category(category), steps);
  }

  std::uint64_t get(StepCategory category) const {
    return counters_[static_cast<std::size_t>(category)].load();
  }

  LedgerCounts snapshot() const {
    return {counters_[0].load(), counters_[1].load(), counters_[2].load(),
            counters_[3].load()};
  }

  std::uint64_t total() const { return snapshot().total(); }

 private:
  std::atomic<std::uint64_t> counters_[4] = {0, 0, 0, 0};
};

/// One time-series sample: `name` = `value` after `env_steps` interactions.
struct MetricRow {
  std::uint64_t env_steps = 0;
  double wall_seconds = 0.0;
  std::string name;
  double value = 0.0;
};

/// Append-only metrics for one run. env_steps must not decrease.
class MetricsStream {
 public:
  MetricsStream() : start_(std::chrono::steady_clock::now()) {}
  MetricsStream(const MetricsStream& other) : start_(other.start_), rows_(other.rows()) {}
  MetricsStream& operator=(const MetricsStream& other) {
    if (this != &other) {
      auto rows = other.rows();
      std::lock_guard lock(mutex_);
      start_ = other.start_;
      rows_ = std::move(rows);
    }
    return *this;
  }

  void record(std::uint64_t env_steps, std::string name, double value) {
    const double wall = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start_)
                            .count();
    std::lock_guard lock(mutex_);
    if (!rows_.empty() && env_steps < rows_.back().env_steps)
      throw ContractViolation("MetricsStream: env_steps went backwards");
    rows_.push_back({env_steps, wall, std::move(name), value});
  }

  std::vector<MetricRow> rows() const {
    std::lock_guard lock(mutex_);
    return rows_;
  }

  void write_csv(std::ostream& out) const {
    out << "env_steps,wall_seconds,name,value\n";
    for (const auto& r : rows())
      out << r.env_steps << ',' << r.wall_seconds << ',' << r.name << ','
          << r.value << '\n';
  }

 private:
  std::chrono::steady_clock::time_point start_;
  mutable std::mutex mutex_;
  std::vector<MetricRow> rows_;
};

/// Post-training report: reward statistics over the final evaluation
/// episodes plus the sample counts spent in training.
struct RunReport {
  double mean_reward = 0.0;
  double best_reward = 0.0;
  std::size_t episodes = 0;
  LedgerCounts samples;
  std::uint64_t total_samples() const { return samples.total(); }
};

inline RunReport summarize(std::span<const double> episode_rewards,
                           const LedgerCounts& ledger) {
  if (episode_rewards.empty())
    throw ContractViolation("summarize: no evaluation episodes");
  RunReport r;
  r.episodes = episode_rewards.size();
  r.mean_reward =
      std::accumulate(episode_rewards.begin(), episode_rewards.end(), 0.0) /
      static_cast<double>(episode_rewards.size());
  r.best_reward = *std::ranges::max_element(episode_rewards);
  r.samples = ledger;
  return r;
}

}  // namespace epo

#endif  // EPO_LEDGER_HPP_
