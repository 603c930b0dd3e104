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

#ifndef EPO_PPO_HPP_
#define EPO_PPO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epo/adam.hpp"
#include "epo/env.hpp"
#include "epo/error.hpp"
#include "epo/ledger.hpp"
#include "epo/nn.hpp"
#include "epo/rng.hpp"

namespace epo {

struct PPOConfig {
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  int epochs = 10;
  int minibatch_size = 64;
  int rollout_length = 512;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
  double learning_rate = 3e-4;
  double max_grad_norm = 0.5;
  bool normalize_advantages = true;

  void validate() const {
    if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("ppo.clip must be in (0, 1)");
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("ppo.gamma must be in [0, 1]");
    if (gae_lambda < 0.0 || gae_lambda > 1.0)
      throw ConfigError("ppo.gae_lambda must be in [0, 1]");
    if (epochs < 1 || minibatch_size < 1 || rollout_length < 1)
      throw ConfigError("ppo epochs, minibatch_size and rollout_length must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("ppo.learning_rate must be > 0");
    if (!(max_grad_norm > 0.0)) throw ConfigError("ppo.max_grad_norm must be > 0");
  }

  friend bool operator==(const PPOConfig&, const PPOConfig&) = default;
};

struct Transition {
  std::vector<double> observation;
  std::size_t action = 0;
  double log_prob = 0.0;  // at collection time
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
};

struct Rollout {
  std::vector<Transition> transitions;
  std::vector<double> advantages;
  std::vector<double> returns;
  // V(s) of the observation following the last transition (0 if it ended
  // an episode).
  double bootstrap_value = 0.0;
  // Totals of episodes that finished inside this rollout.
  std::vector<double> episode_rewards;

  std::size_t size() const { return transitions.size(); }
};

/// Steps a policy through an environment, auto-resetting between episodes.
/// Keeps its episode state across collect() calls so consecutive rollouts
/// continue where the previous one stopped.
class RolloutCollector {
 public:
  RolloutCollector(const Environment& env, std::uint64_t seed)
      : env_(env), seed_(seed), rng_(derive_seed(seed, {0xC011EC7})) {}

  Rollout collect(const ParameterVector& params, const NetworkSpec& spec,
                  int length) {
    if (length < 1) throw ContractViolation("collect_rollout: length must be >= 1");
    if (spec.input_dim != env_.observation_size() ||
        spec.action_count != env_.action_count())
      throw ContractViolation("collect_rollout: network does not fit " + env_.name());
    Rollout r;
    r.transitions.reserve(static_cast<std::size_t>(length));
    for (int t = 0; t < length; ++t) {
      if (!state_) begin_episode();
      const auto out = forward(params, spec, state_->observation);
      const std::size_t action = sample_action(out.logits, rng_);
      auto step = env_.step(*state_, action);
      episode_reward_ += step.reward;
      r.transitions.push_back({state_->observation, action,
                               softmax_logprob(out.logits, action), step.reward,
                               out.value, step.done});
      if (step.done) {
        r.episode_rewards.push_back(episode_reward_);
        state_.reset();
      } else {
        state_ = std::move(step.next);
      }
    }
    r.bootstrap_value =
        state_ ? forward(params, spec, state_->observation).value : 0.0;
    return r;
  }

 private:
  void begin_episode() {
    state_ = env_.reset(derive_seed(seed_, {episodes_++}));
    episode_reward_ = 0.0;
  }

  const Environment& env_;
  std::uint64_t seed_;
  Rng rng_;
  std::optional<EnvState> state_;
  std::uint64_t episodes_ = 0;
  double episode_reward_ = 0.0;
};

inline Rollout collect_rollout(const ParameterVector& params,
                               const NetworkSpec& spec, const Environment& env,
                               int length, std::uint64_t seed) {
  RolloutCollector collector(env, seed);
  return collector.collect(params, spec, length);
}

/// Generalized advantage estimation, backward recursion:
///   delta_t = r_t + gamma V(s_{t+1}) (1 - done_t) - V(s_t)
///   A_t     = delta_t + gamma lambda (1 - done_t) A_{t+1}
/// returns = advantages + values.
inline std::pair<std::vector<double>, std::vector<double>> compute_gae(
    const Rollout& rollout, double gamma, double lambda,
    double bootstrap_value) {
  const auto& tr = rollout.transitions;
  if (tr.empty()) throw ContractViolation("compute_gae: empty rollout");
  const std::size_t n = tr.size();
  std::vector<double> adv(n), ret(n);
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value = t + 1 < n ? tr[t + 1].value : bootstrap_value;
    const double not_done = tr[t].done ? 0.0 : 1.0;
    const double delta = tr[t].reward + gamma * next_value * not_done - tr[t].value;
    next_adv = delta + gamma * lambda * not_done * next_adv;
    adv[t] = next_adv;
    ret[t] = adv[t] + tr[t].value;
  }
  return {std::move(adv), std::move(ret)};
}

/// Fills rollout.advantages and rollout.returns in place.
inline void compute_gae(Rollout& rollout, double gamma, double lambda) {
  auto [adv, ret] = compute_gae(rollout, gamma, lambda, rollout.bootstrap_value);
  rollout.advantages = std::move(adv);
  rollout.returns = std::move(ret);
}

/// Shifts to zero mean and scales to unit (population) std. Batches of one
/// are left alone.
inline void normalize_advantages(std::span<double> adv) {
  if (adv.size() < 2) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double std = std::sqrt(var / n);
  for (double& a : adv) a = (a - mean) / (std + 1e-8);
}

/// min(r A, clip(r, 1 - eps, 1 + eps) A)
inline double clipped_surrogate(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return std::min(ratio * advantage, clipped * advantage);
}

struct PpoDiagnostics {
  double loss = 0.0;
  double surrogate = 0.0;  // mean clipped surrogate (maximized)
  double value_loss = 0.0;
  double entropy = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

class PpoLossError : public NumericalError {
 public:
  PpoLossError(const std::string& what, PpoDiagnostics d)
      : NumericalError(what), diagnostics(d) {}
  PpoDiagnostics diagnostics;
};

/// Samples the PPO loss is evaluated on. Views into a Rollout.
struct PpoBatch {
  std::vector<std::span<const double>> observations;
  std::vector<std::size_t> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return actions.size(); }

  static PpoBatch from(const Rollout& r, std::span<const std::size_t> indices) {
    if (r.advantages.size() != r.size() || r.returns.size() != r.size())
      throw ContractViolation("PpoBatch: rollout has no advantages; run compute_gae first");
    PpoBatch b;
    for (std::size_t i : indices) {
      const auto& t = r.transitions.at(i);
      b.observations.emplace_back(t.observation);
      b.actions.push_back(t.action);
      b.old_log_probs.push_back(t.log_prob);
      b.advantages.push_back(r.advantages[i]);
      b.returns.push_back(r.returns[i]);
    }
    return b;
  }

  static PpoBatch from(const Rollout& r) {
    std::vector<std::size_t> all(r.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return from(r, all);
  }
};

/// loss = -mean(clipped surrogate) + c_v mean((R - V)^2) - c_e mean(H)
/// Usable directly as an OutputLoss for backward().
class PpoLoss {
 public:
  PpoLoss(const PpoBatch& batch, const PPOConfig& config)
      : batch_(batch), config_(config) {}

  double operator()(std::span<const PolicyOutput> outputs,
                    std::span<OutputGradient> grads) const {
    return evaluate(outputs, grads, nullptr);
  }

  double evaluate(std::span<const PolicyOutput> outputs,
                  std::span<OutputGradient> grads,
                  PpoDiagnostics* diag) const {
    const std::size_t n = outputs.size();
    if (n == 0 || n != batch_.size())
      throw ContractViolation("ppo_loss: batch and outputs disagree in size");
    const double inv_n = 1.0 / static_cast<double>(n);
    const double eps = config_.clip;
    PpoDiagnostics d;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& logits = outputs[i].logits;
      const std::size_t a = batch_.actions[i];
      const double logp = softmax_logprob(logits, a);
      const double log_ratio = logp - batch_.old_log_probs[i];
      const double ratio = std::exp(log_ratio);
      const double adv = batch_.advantages[i];
      const double unclipped = ratio * adv;
      const double surrogate = clipped_surrogate(ratio, adv, eps);
      const double h = entropy(logits);
      const double err = outputs[i].value - batch_.returns[i];

      d.surrogate += surrogate * inv_n;
      d.value_loss += err * err * inv_n;
      d.entropy += h * inv_n;
      d.mean_ratio += ratio * inv_n;
      if (std::abs(ratio - 1.0) > eps) d.clip_fraction += inv_n;
      d.approx_kl += ((ratio - 1.0) - log_ratio) * inv_n;

      if (grads.empty()) continue;
      auto& g = grads[i];
      // d(-surrogate)/dlogp is -ratio*A while the unclipped branch is the
      // minimum, zero once the clipped constant takes over.
      const double dsurr_dlogp = unclipped <= surrogate ? ratio * adv : 0.0;
      const double lse = log_sum_exp(logits);
      for (std::size_t k = 0; k < logits.size(); ++k) {
        const double lp = logits[k] - lse;
        const double pk = std::exp(lp);
        const double dlogp = (k == a ? 1.0 : 0.0) - pk;
        const double dh = -pk * (lp + h);
        g.dlogits[k] =
            inv_n * (-dsurr_dlogp * dlogp - config_.entropy_coef * dh);
      }
      g.dvalue = inv_n * config_.value_coef * 2.0 * err;
    }
    d.loss = -d.surrogate + config_.value_coef * d.value_loss -
             config_.entropy_coef * d.entropy;
    if (diag) *diag = d;
    if (!std::isfinite(d.loss)) throw PpoLossError("ppo_loss: non-finite loss", d);
    return d.loss;
  }

 private:
  const PpoBatch& batch_;
  const PPOConfig& config_;
};

/// Loss value and diagnostics at `params` (no gradient).
inline PpoDiagnostics ppo_loss(const ParameterVector& params,
                               const NetworkSpec& spec, const PpoBatch& batch,
                               const PPOConfig& config) {
  std::vector<PolicyOutput> outputs;
  outputs.reserve(batch.size());
  for (auto obs : batch.observations) outputs.push_back(forward(params, spec, obs));
  PpoDiagnostics d;
  PpoLoss(batch, config).evaluate(outputs, {}, &d);
  return d;
}

inline PpoDiagnostics ppo_loss(const ParameterVector& params,
                               const NetworkSpec& spec, const Rollout& rollout,
                               const PPOConfig& config) {
  return ppo_loss(params, spec, PpoBatch::from(rollout), config);
}

/// Rescales `grad` in place so its global L2 norm is at most `max_norm`.
inline double clip_grad_norm(ParameterVector& grad, double max_norm) {
  const double norm = l2_norm(grad.values());
  if (norm > max_norm) {
    const double scale = max_norm / (norm + 1e-6);
    for (double& g : grad.values()) g *= scale;
  }
  return norm;
}

/// One PPO update (epochs x shuffled minibatches) on a rollout that already
/// carries advantages. Returns diagnostics of the last minibatch.
inline PpoDiagnostics ppo_update(ParameterVector& params, const NetworkSpec& spec,
                                 const Rollout& rollout, const PPOConfig& config,
                                 AdamState& adam, Rng& rng) {
  std::vector<std::size_t> order(rollout.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto mb = static_cast<std::size_t>(config.minibatch_size);
  PpoDiagnostics last;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t end = std::min(order.size(), start + mb);
      auto batch = PpoBatch::from(
          rollout, std::span<const std::size_t>(order).subspan(start, end - start));
      if (config.normalize_advantages) normalize_advantages(batch.advantages);
      PpoLoss loss(batch, config);
      auto lg = backward(params, spec,
                         std::span<const std::span<const double>>(batch.observations),
                         loss);
      clip_grad_norm(lg.gradient, config.max_grad_norm);
      adam_step(params, lg.gradient, adam);
      last.loss = lg.loss;
    }
  }
  auto full = PpoBatch::from(rollout);
  if (config.normalize_advantages) normalize_advantages(full.advantages);
  auto d = ppo_loss(params, spec, full, config);
  d.loss = last.loss;
  return d;
}

struct TrainHooks {
  MetricsStream* metrics = nullptr;
  // Checked between cycles; returning true ends training early.
  std::function<bool()> stop;
  // Called after every collect/update cycle.
  std::function<void(long long cycle, const Rollout&, const PpoDiagnostics&)> on_cycle;
};

/// Runs ceil(total_timesteps / rollout_length) collect/update cycles and
/// charges every environment step to `category`. A fresh optimizer state is
/// created per call.
inline ParameterVector train(ParameterVector params, const NetworkSpec& spec,
                             const Environment& env, long long total_timesteps,
                             const PPOConfig& config, std::uint64_t seed,
                             SampleLedger& ledger, StepCategory category,
                             const TrainHooks& hooks = {}) {
  config.validate();
  if (total_timesteps < config.rollout_length)
    throw ContractViolation("train: total_timesteps " + std::to_string(total_timesteps) +
                            " is below one rollout of " +
                            std::to_string(config.rollout_length));
  if (!params.matches(spec))
    throw ContractViolation("train: parameters do not match network layout");

  const long long cycles =
      (total_timesteps + config.rollout_length - 1) / config.rollout_length;
  AdamState adam(params.size(), AdamConfig{config.learning_rate});
  Rng rng(derive_seed(seed, {0x7EA1}));
  RolloutCollector collector(env, derive_seed(seed, {0x5EED}));
  MetricsStream* metrics = hooks.metrics;
  for (long long c = 0; c < cycles; ++c) {
    if (hooks.stop && hooks.stop()) break;
    Rollout rollout = collector.collect(params, spec, config.rollout_length);
    ledger.charge(category, rollout.size());
    compute_gae(rollout, config.gamma, config.gae_lambda);
    const auto d = ppo_update(params, spec, rollout, config, adam, rng);
    if (metrics) {
      const auto steps = ledger.total();
      if (!rollout.episode_rewards.empty()) {
        metrics->record(steps, "train_mean_reward",
                        std::accumulate(rollout.episode_rewards.begin(),
                                        rollout.episode_rewards.end(), 0.0) /
                            static_cast<double>(rollout.episode_rewards.size()));
      }
      metrics->record(steps, "loss", d.loss);
      metrics->record(steps, "clip_fraction", d.clip_fraction);
      metrics->record(steps, "entropy", d.entropy);
    }
    if (hooks.on_cycle) hooks.on_cycle(c, rollout, d);
  }
  return params;
}

}  // namespace epo

#endif  // EPO_PPO_HPP_
