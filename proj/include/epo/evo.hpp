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

#ifndef EPO_EVO_HPP_
#define EPO_EVO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "epo/error.hpp"
#include "epo/nn.hpp"
#include "epo/rng.hpp"

namespace epo {

struct FitnessRecord {
  double raw = 0.0;      // mean reward over the evaluation episodes
  double shifted = 0.0;  // raw - generation minimum, never negative
  int episodes = 0;
  std::uint64_t env_steps = 0;
};

/// How the mutation scaling factor becomes a noise level.
enum class SigmaMode {
  kStd,  // sigma = scaling factor
  kVar,  // sigma^2 = scaling factor
};

inline SigmaMode parse_sigma_mode(std::string_view s) {
  if (s == "std") return SigmaMode::kStd;
  if (s == "var") return SigmaMode::kVar;
  throw ConfigError("mutation_sigma_mode must be 'std' or 'var', got '" +
                    std::string(s) + "'");
}

inline std::string_view to_string(SigmaMode m) {
  return m == SigmaMode::kStd ? "std" : "var";
}

struct EvoConfig {
  double mutation_prob = 0.3;
  int elite_count = 3;
  int population_size = 8;
  double epsilon = 1e-8;
  double scaling_min = 0.01;
  double scaling_max = 0.1;
  SigmaMode sigma_mode = SigmaMode::kStd;

  void validate() const {
    if (mutation_prob < 0.0 || mutation_prob > 1.0)
      throw ConfigError("evo.mutation_prob must be in [0, 1]");
    if (elite_count < 1 || elite_count >= population_size)
      throw ConfigError("evo.elite_count must satisfy 1 <= elite_count < population_size");
    if (!(epsilon > 0.0)) throw ConfigError("evo.epsilon must be > 0");
    if (!(scaling_min > 0.0 && scaling_min <= scaling_max))
      throw ConfigError("evo scaling clamp bounds must satisfy 0 < min <= max");
  }

  friend bool operator==(const EvoConfig&, const EvoConfig&) = default;
};

/// Replaces every shifted fitness with raw - min(raw).
inline void shift_fitness(std::span<FitnessRecord> records) {
  if (records.empty()) return;
  double lo = records.front().raw;
  for (const auto& r : records) lo = std::min(lo, r.raw);
  for (auto& r : records) r.shifted = r.raw - lo;
}

/// Indices of the min(E, n) highest raw fitnesses, best first. Equal
/// fitness keeps the lower index first.
inline std::vector<std::size_t> select_elites(std::span<const double> fitness,
                                              int elite_count) {
  if (fitness.empty()) throw ContractViolation("select_elites: empty population");
  if (elite_count < 1) throw ContractViolation("select_elites: elite count must be >= 1");
  std::vector<std::size_t> order(fitness.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
    return fitness[a] > fitness[b];
  });
  order.resize(std::min(order.size(), static_cast<std::size_t>(elite_count)));
  return order;
}

/// alpha = f1 / (f1 + f2 + eps)
inline double crossover_alpha(double f1, double f2, double epsilon = 1e-8) {
  if (f1 < 0.0 || f2 < 0.0)
    throw ContractViolation("crossover_alpha: fitness must be shifted to be non-negative");
  return f1 / (f1 + f2 + epsilon);
}

/// child = alpha p1 + (1 - alpha) p2, coordinate-wise.
inline ParameterVector crossover(const ParameterVector& p1,
                                 const ParameterVector& p2, double alpha) {
  if (!p1.compatible(p2)) throw ContractViolation("crossover: parent layouts differ");
  if (alpha < 0.0 || alpha > 1.0)
    throw ContractViolation("crossover: alpha must be in [0, 1]");
  ParameterVector child(p1.layout());
  auto c = child.values();
  auto a = p1.values();
  auto b = p2.values();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = alpha * a[i] + (1.0 - alpha) * b[i];
  return child;
}

/// max(lo, min(hi, |f1 - f2| / max(f1 + f2, eps)))
inline double mutation_scaling(double f1, double f2, double epsilon = 1e-8,
                               double lo = 0.01, double hi = 0.1) {
  if (f1 < 0.0 || f2 < 0.0)
    throw ContractViolation("mutation_scaling: fitness must be shifted to be non-negative");
  const double ratio = std::abs(f1 - f2) / std::max(f1 + f2, epsilon);
  return std::max(lo, std::min(hi, ratio));
}

/// Adds i.i.d. Gaussian noise to every coordinate. With SigmaMode::kStd the
/// noise standard deviation equals `scaling`.
inline ParameterVector mutate(const ParameterVector& child, double scaling,
                              std::uint64_t seed,
                              SigmaMode mode = SigmaMode::kStd,
                              double lo = 0.01, double hi = 0.1) {
  if (!(scaling >= lo && scaling <= hi))
    throw ContractViolation("mutate: scaling factor outside clamp bounds");
  const double sigma = mode == SigmaMode::kStd ? scaling : std::sqrt(scaling);
  Rng rng(seed);
  ParameterVector out = child;
  for (double& w : out.values()) w += sigma * rng.normal();
  return out;
}

}  // namespace epo

#endif  // EPO_EVO_HPP_
