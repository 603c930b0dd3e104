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

#ifndef EPO_ADAM_HPP_
#define EPO_ADAM_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "epo/error.hpp"
#include "epo/nn.hpp"

namespace epo {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Single writer: one AdamState must not be stepped from two threads.
struct AdamState {
  AdamConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t size, AdamConfig cfg)
      : config(cfg), first_moment(size, 0.0), second_moment(size, 0.0) {}
};

/// One bias-corrected Adam update, in place.
inline void adam_step(ParameterVector& params, const ParameterVector& grads,
                      AdamState& state) {
  if (!params.compatible(grads) ||
      state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size())
    throw ContractViolation("adam_step: layout mismatch");

  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);

  auto p = params.values();
  auto g = grads.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g[i];
    v = c.beta2 * v + (1.0 - c.beta2) * g[i] * g[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    p[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
  if (!params.all_finite())
    throw NumericalError("adam_step: update produced non-finite parameters");
}

}  // namespace epo

#endif  // EPO_ADAM_HPP_
