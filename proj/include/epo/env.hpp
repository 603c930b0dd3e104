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

#ifndef EPO_ENV_HPP_
#define EPO_ENV_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "epo/error.hpp"
#include "epo/nn.hpp"
#include "epo/rng.hpp"

namespace epo {

enum class EnvId { kCartPole, kCatchDense, kCatchSparse };

inline std::string to_string(EnvId id) {
  switch (id) {
    case EnvId::kCartPole: return "cartpole";
    case EnvId::kCatchDense: return "catch-dense";
    case EnvId::kCatchSparse: return "catch-sparse";
  }
  return "unknown";
}

inline EnvId parse_env_id(std::string_view s) {
  if (s == "cartpole") return EnvId::kCartPole;
  if (s == "catch-dense") return EnvId::kCatchDense;
  if (s == "catch-sparse") return EnvId::kCatchSparse;
  throw ConfigError("unknown environment id '" + std::string(s) +
                    "' (expected cartpole, catch-dense or catch-sparse)");
}

struct EnvConfig {
  EnvId id = EnvId::kCatchSparse;
  int horizon = 100;
  std::uint64_t seed = 0;
  int noop_min = 0;
  int noop_max = 3;
  // Catch grid. Ignored by cartpole.
  int grid_rows = 7;
  int grid_cols = 5;

  void validate() const {
    if (horizon < 1) throw ConfigError("env.horizon must be >= 1");
    if (noop_min < 0 || noop_max > 30 || noop_min > noop_max)
      throw ConfigError("env no-op range must satisfy 0 <= min <= max <= 30");
    if (id != EnvId::kCartPole && (grid_rows < 2 || grid_cols < 1))
      throw ConfigError("catch grid needs at least 2 rows and 1 column");
  }

  static EnvConfig defaults_for(EnvId id) {
    EnvConfig c;
    c.id = id;
    if (id == EnvId::kCartPole) {
      c.horizon = 500;
      c.noop_max = 5;
    }
    return c;
  }

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

struct EnvState {
  std::vector<double> observation;
  int step_index = 0;
  bool terminated = false;
  int noops_applied = 0;
  // Environment-specific hidden state (positions, velocities).
  std::vector<double> internal;
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;

  const std::vector<double>& observation() const { return next.observation; }
};

/// Stateless environment: all episode state lives in EnvState, so one
/// instance can be shared by any number of concurrent rollouts.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t observation_size() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual EnvState reset(std::uint64_t episode_seed) const = 0;
  virtual StepResult step(const EnvState& state, std::size_t action) const = 0;
};

/// Shared plumbing for built-in environments: horizon, seeded no-op starts,
/// precondition checks. Subclasses describe the dynamics only.
class BasicEnvironment : public Environment {
 public:
  explicit BasicEnvironment(EnvConfig config) : config_(std::move(config)) {
    config_.validate();
  }

  const EnvConfig& config() const { return config_; }

  EnvState reset(std::uint64_t episode_seed) const final {
    Rng rng(derive_seed(config_.seed, {episode_seed}));
    EnvState s;
    s.internal = initial_internal(rng);
    const auto noops = static_cast<int>(rng.uniform_int(config_.noop_min,
                                                        config_.noop_max));
    for (int i = 0; i < noops; ++i) {
      auto t = transition(s.internal, std::nullopt);
      if (t.terminal) break;
      s.internal = std::move(t.internal);
      ++s.noops_applied;
    }
    s.observation = observe(s.internal);
    return s;
  }

  StepResult step(const EnvState& state, std::size_t action) const final {
    if (state.terminated)
      throw ContractViolation(name() + ": step called on a terminated state");
    if (action >= action_count())
      throw ContractViolation(name() + ": action " + std::to_string(action) +
                              " out of range");
    auto t = transition(state.internal, action);
    StepResult r;
    r.reward = t.reward;
    r.next.internal = std::move(t.internal);
    r.next.step_index = state.step_index + 1;
    r.next.noops_applied = state.noops_applied;
    r.done = t.terminal || r.next.step_index >= config_.horizon;
    r.next.terminated = r.done;
    r.next.observation = observe(r.next.internal);
    return r;
  }

 protected:
  struct Transition {
    std::vector<double> internal;
    double reward = 0.0;
    bool terminal = false;
  };

  virtual std::vector<double> initial_internal(Rng& rng) const = 0;
  // `action` empty means a no-op start step.
  virtual Transition transition(const std::vector<double>& internal,
                                std::optional<std::size_t> action) const = 0;
  virtual std::vector<double> observe(const std::vector<double>& internal) const = 0;

  EnvConfig config_;
};

/// Classic cart-pole balancing (Barto, Sutton & Anderson dynamics, explicit
/// Euler at tau = 0.02 s). +1 per step including the failing one. No-op
/// starts apply zero force.
class CartPole final : public BasicEnvironment {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForce = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kAngleLimit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
  static constexpr double kPositionLimit = 2.4;

  explicit CartPole(EnvConfig config) : BasicEnvironment(std::move(config)) {}

  std::string name() const override { return "cartpole"; }
  std::size_t observation_size() const override { return 4; }
  std::size_t action_count() const override { return 2; }

  /// One Euler step of the equations of motion under horizontal `force`.
  static std::vector<double> integrate(const std::vector<double>& s,
                                       double force) {
    const double x = s[0], x_dot = s[1], theta = s[2], theta_dot = s[3];
    const double total_mass = kCartMass + kPoleMass;
    const double pole_ml = kPoleMass * kHalfLength;
    const double cos_t = std::cos(theta), sin_t = std::sin(theta);
    const double temp =
        (force + pole_ml * theta_dot * theta_dot * sin_t) / total_mass;
    const double theta_acc =
        (kGravity * sin_t - cos_t * temp) /
        (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
    const double x_acc = temp - pole_ml * theta_acc * cos_t / total_mass;
    return {x + kTau * x_dot, x_dot + kTau * x_acc, theta + kTau * theta_dot,
            theta_dot + kTau * theta_acc};
  }

  static bool failed(const std::vector<double>& s) {
    return s[0] < -kPositionLimit || s[0] > kPositionLimit ||
           s[2] < -kAngleLimit || s[2] > kAngleLimit;
  }

 protected:
  std::vector<double> initial_internal(Rng& rng) const override {
    std::vector<double> s(4);
    for (double& v : s) v = rng.uniform(-0.05, 0.05);
    return s;
  }

  Transition transition(const std::vector<double>& s,
                        std::optional<std::size_t> action) const override {
    double force = 0.0;
    if (action) force = *action == 1 ? kForce : -kForce;
    Transition t;
    t.internal = integrate(s, force);
    t.terminal = failed(t.internal);
    t.reward = 1.0;
    return t;
  }

  std::vector<double> observe(const std::vector<double>& s) const override {
    return s;
  }
};

/// Ball falls one row per step from a random column of the top row; the
/// paddle on the bottom row moves left / stays / moves right. The episode
/// ends when the ball reaches the bottom row. Dense variant pays +1 / -1 at
/// contact, sparse variant pays +1 on a catch and 0 otherwise.
class Catch final : public BasicEnvironment {
 public:
  enum Action : std::size_t { kLeft = 0, kStay = 1, kRight = 2 };

  explicit Catch(EnvConfig config) : BasicEnvironment(std::move(config)) {
    if (config_.id == EnvId::kCartPole)
      throw ConfigError("Catch constructed with a cartpole config");
  }

  std::string name() const override { return to_string(config_.id); }
  std::size_t observation_size() const override { return 3; }
  std::size_t action_count() const override { return 3; }
  bool sparse() const { return config_.id == EnvId::kCatchSparse; }

  int rows() const { return config_.grid_rows; }
  int cols() const { return config_.grid_cols; }

  /// internal = {ball column, ball row, paddle column}
  static int ball_col(const EnvState& s) { return static_cast<int>(s.internal[0]); }
  static int ball_row(const EnvState& s) { return static_cast<int>(s.internal[1]); }
  static int paddle_col(const EnvState& s) { return static_cast<int>(s.internal[2]); }

 protected:
  std::vector<double> initial_internal(Rng& rng) const override {
    const auto col = static_cast<double>(rng.uniform_int(0, cols() - 1));
    return {col, 0.0, static_cast<double>(cols() / 2)};
  }

  Transition transition(const std::vector<double>& s,
                        std::optional<std::size_t> action) const override {
    Transition t;
    t.internal = s;
    double& paddle = t.internal[2];
    const std::size_t a = action.value_or(kStay);
    if (a == kLeft) paddle = std::max(0.0, paddle - 1.0);
    if (a == kRight) paddle = std::min(static_cast<double>(cols() - 1), paddle + 1.0);
    t.internal[1] += 1.0;
    if (static_cast<int>(t.internal[1]) >= rows() - 1) {
      t.terminal = true;
      const bool caught = t.internal[0] == paddle;
      t.reward = caught ? 1.0 : (sparse() ? 0.0 : -1.0);
    }
    return t;
  }

  std::vector<double> observe(const std::vector<double>& s) const override {
    auto scale = [](double v, int n) {
      return n > 1 ? 2.0 * v / static_cast<double>(n - 1) - 1.0 : 0.0;
    };
    return {scale(s[0], cols()), scale(s[1], rows()), scale(s[2], cols())};
  }
};

inline std::shared_ptr<const Environment> make_environment(const EnvConfig& config) {
  config.validate();
  if (config.id == EnvId::kCartPole) return std::make_shared<CartPole>(config);
  return std::make_shared<Catch>(config);
}

/// Wraps another environment and independently counts every step() call.
class CountingEnvironment final : public Environment {
 public:
  explicit CountingEnvironment(std::shared_ptr<const Environment> inner)
      : inner_(std::move(inner)) {}

  std::string name() const override { return inner_->name(); }
  std::size_t observation_size() const override { return inner_->observation_size(); }
  std::size_t action_count() const override { return inner_->action_count(); }
  EnvState reset(std::uint64_t seed) const override { return inner_->reset(seed); }
  StepResult step(const EnvState& s, std::size_t a) const override {
    steps_.fetch_add(1, std::memory_order_relaxed);
    return inner_->step(s, a);
  }

  std::uint64_t steps() const { return steps_.load(); }

 private:
  std::shared_ptr<const Environment> inner_;
  mutable std::atomic<std::uint64_t> steps_{0};
};

struct EvaluationResult {
  double mean_reward = 0.0;
  std::vector<double> episode_rewards;
  std::uint64_t env_steps = 0;
};

/// Runs `episodes` full episodes with episode seeds derived from `seed`.
/// Greedy (argmax) actions unless `stochastic`, in which case actions are
/// sampled from the softmax.
inline EvaluationResult evaluate_policy(const ParameterVector& params,
                                        const NetworkSpec& spec,
                                        const Environment& env, int episodes,
                                        std::uint64_t seed,
                                        bool stochastic = false) {
  if (episodes < 1) throw ContractViolation("evaluate_policy: episodes must be >= 1");
  if (spec.input_dim != env.observation_size() ||
      spec.action_count != env.action_count())
    throw ContractViolation("evaluate_policy: network does not fit " + env.name());
  EvaluationResult r;
  r.episode_rewards.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    const auto episode_seed = derive_seed(seed, {static_cast<std::uint64_t>(e)});
    Rng action_rng(derive_seed(episode_seed, {1}));
    EnvState state = env.reset(episode_seed);
    double total = 0.0;
    for (;;) {
      const auto out = forward(params, spec, state.observation);
      std::size_t action;
      if (stochastic) {
        action = sample_action(out.logits, action_rng);
      } else {
        action = argmax(out.logits);
      }
      auto step = env.step(state, action);
      ++r.env_steps;
      total += step.reward;
      if (step.done) break;
      state = std::move(step.next);
    }
    r.episode_rewards.push_back(total);
  }
  r.mean_reward = std::accumulate(r.episode_rewards.begin(),
                                  r.episode_rewards.end(), 0.0) /
                  static_cast<double>(episodes);
  return r;
}

}  // namespace epo

#endif  // EPO_ENV_HPP_
