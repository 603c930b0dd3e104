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

#ifndef EPO_NN_HPP_
#define EPO_NN_HPP_

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "epo/error.hpp"
#include "epo/rng.hpp"

namespace epo {

/// Shape of one dense layer inside the flat parameter array. Weights are
/// stored row-major (rows = outputs, cols = inputs), followed by the bias.
struct LayerShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t bias = 0;

  std::size_t size() const { return rows * cols + bias; }
  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

using Layout = std::vector<LayerShape>;

/// Actor-critic MLP: tanh trunk shared by a linear policy head (one logit
/// per action) and a linear scalar value head.
struct NetworkSpec {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t action_count = 0;

  void validate() const {
    if (input_dim < 1 || action_count < 1 || hidden.empty() ||
        std::ranges::any_of(hidden, [](std::size_t h) { return h < 1; }))
      throw ContractViolation(
          "NetworkSpec: need input, action count and at least one hidden "
          "layer, all >= 1");
  }

  std::size_t trunk_depth() const { return hidden.size(); }

  /// Hidden layers in order, then the policy head, then the value head.
  Layout layout() const {
    validate();
    Layout out;
    std::size_t in = input_dim;
    for (std::size_t h : hidden) {
      out.push_back({h, in, h});
      in = h;
    }
    out.push_back({action_count, in, action_count});
    out.push_back({1, in, 1});
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layout()) n += l.size();
    return n;
  }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Weights and bias of one layer, unflattened.
struct LayerParams {
  LayerShape shape;
  std::vector<double> weights;
  std::vector<double> bias;
};

/// Every weight of a network in one contiguous array. This is the unit that
/// crossover, mutation, and the optimizer operate on.
class ParameterVector {
 public:
  ParameterVector() = default;

  explicit ParameterVector(Layout layout)
      : layout_(std::move(layout)), values_(total_size(layout_), 0.0) {}

  ParameterVector(Layout layout, std::vector<double> values)
      : layout_(std::move(layout)), values_(std::move(values)) {
    if (values_.size() != total_size(layout_))
      throw ContractViolation("ParameterVector: value count " +
                              std::to_string(values_.size()) +
                              " does not match layout size " +
                              std::to_string(total_size(layout_)));
  }

  static ParameterVector zeros(const NetworkSpec& spec) {
    return ParameterVector(spec.layout());
  }

  std::size_t size() const { return values_.size(); }
  const Layout& layout() const { return layout_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool compatible(const ParameterVector& other) const {
    return layout_ == other.layout_;
  }
  bool matches(const NetworkSpec& spec) const {
    return layout_ == spec.layout();
  }

  bool all_finite() const {
    return std::ranges::all_of(values_,
                               [](double v) { return std::isfinite(v); });
  }

  std::size_t offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < layer; ++i) off += layout_[i].size();
    return off;
  }

  std::span<const double> weights(std::size_t layer) const {
    const auto& s = layout_.at(layer);
    return std::span<const double>(values_).subspan(offset(layer),
                                                    s.rows * s.cols);
  }
  std::span<const double> bias(std::size_t layer) const {
    const auto& s = layout_.at(layer);
    return std::span<const double>(values_).subspan(
        offset(layer) + s.rows * s.cols, s.bias);
  }

  std::vector<LayerParams> unflatten() const {
    std::vector<LayerParams> out;
    for (std::size_t i = 0; i < layout_.size(); ++i) {
      auto w = weights(i);
      auto b = bias(i);
      out.push_back({layout_[i], {w.begin(), w.end()}, {b.begin(), b.end()}});
    }
    return out;
  }

  static ParameterVector flatten(const std::vector<LayerParams>& layers) {
    Layout layout;
    std::vector<double> values;
    for (const auto& l : layers) {
      if (l.weights.size() != l.shape.rows * l.shape.cols ||
          l.bias.size() != l.shape.bias)
        throw ContractViolation("flatten: layer data does not match shape");
      layout.push_back(l.shape);
      values.insert(values.end(), l.weights.begin(), l.weights.end());
      values.insert(values.end(), l.bias.begin(), l.bias.end());
    }
    return ParameterVector(std::move(layout), std::move(values));
  }

  friend bool operator==(const ParameterVector&,
                         const ParameterVector&) = default;

 private:
  static std::size_t total_size(const Layout& layout) {
    std::size_t n = 0;
    for (const auto& l : layout) n += l.size();
    return n;
  }

  Layout layout_;
  std::vector<double> values_;
};

struct PolicyOutput {
  std::vector<double> logits;
  double value = 0.0;
};

/// dLoss/dlogits and dLoss/dvalue for one sample.
struct OutputGradient {
  std::vector<double> dlogits;
  double dvalue = 0.0;
};

namespace detail {

inline std::string layer_name(const NetworkSpec& spec, std::size_t layer) {
  if (layer < spec.trunk_depth()) return "hidden[" + std::to_string(layer) + "]";
  return layer == spec.trunk_depth() ? "policy_head" : "value_head";
}

inline void check_inputs(const ParameterVector& params, const NetworkSpec& spec,
                         std::span<const double> obs) {
  if (obs.size() != spec.input_dim)
    throw ContractViolation("forward: observation has " +
                            std::to_string(obs.size()) + " entries, network expects " +
                            std::to_string(spec.input_dim));
  if (!params.matches(spec))
    throw ContractViolation("forward: parameters do not match network layout");
}

// out = W x + b
inline void affine(std::span<const double> w, std::span<const double> b,
                   std::span<const double> x, std::span<double> out) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < out.size(); ++r) {
    const double* row = w.data() + r * cols;
    double acc = b[r];
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

inline void check_finite(std::span<const double> v, const NetworkSpec& spec,
                         std::size_t layer, const char* what) {
  for (double x : v)
    if (!std::isfinite(x))
      throw NumericalError(std::string("non-finite ") + what + " in layer " +
                           layer_name(spec, layer));
}

/// Activations kept for the reverse pass: the input followed by every
/// hidden layer output.
struct ForwardTrace {
  std::vector<std::vector<double>> activations;
  PolicyOutput output;
};

inline ForwardTrace forward_trace(const ParameterVector& params,
                                  const NetworkSpec& spec,
                                  std::span<const double> obs,
                                  bool check = false) {
  ForwardTrace t;
  t.activations.reserve(spec.trunk_depth() + 1);
  t.activations.emplace_back(obs.begin(), obs.end());
  for (std::size_t l = 0; l < spec.trunk_depth(); ++l) {
    std::vector<double> h(params.layout()[l].rows);
    affine(params.weights(l), params.bias(l), t.activations.back(), h);
    for (double& x : h) x = std::tanh(x);
    if (check) check_finite(h, spec, l, "activation");
    t.activations.push_back(std::move(h));
  }
  const std::size_t ph = spec.trunk_depth();
  t.output.logits.resize(spec.action_count);
  affine(params.weights(ph), params.bias(ph), t.activations.back(),
         t.output.logits);
  double v = 0.0;
  affine(params.weights(ph + 1), params.bias(ph + 1), t.activations.back(),
         std::span<double>(&v, 1));
  t.output.value = v;
  if (check) {
    check_finite(t.output.logits, spec, ph, "logit");
    check_finite(std::span<const double>(&v, 1), spec, ph + 1, "value");
  }
  return t;
}

}  // namespace detail

/// Maps one observation to policy logits and a value estimate.
inline PolicyOutput forward(const ParameterVector& params,
                            const NetworkSpec& spec,
                            std::span<const double> obs) {
  detail::check_inputs(params, spec, obs);
  return detail::forward_trace(params, spec, obs).output;
}

/// Index of the largest logit; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> logits) {
  detail::require(!logits.empty(), "argmax: empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

/// log-sum-exp with max subtraction.
inline double log_sum_exp(std::span<const double> logits) {
  const double m = *std::ranges::max_element(logits);
  double s = 0.0;
  for (double z : logits) s += std::exp(z - m);
  return m + std::log(s);
}

inline std::vector<double> softmax(std::span<const double> logits) {
  detail::require(!logits.empty(), "softmax: empty logits");
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

/// Draws an action index from softmax(logits) with one uniform variate.
inline std::size_t sample_action(std::span<const double> logits, Rng& rng) {
  const auto p = softmax(logits);
  double u = rng.uniform();
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    if (u < p[i]) return i;
    u -= p[i];
  }
  return p.size() - 1;
}

/// log pi(action | state) under a softmax over `logits`.
inline double softmax_logprob(std::span<const double> logits,
                              std::size_t action) {
  if (action >= logits.size())
    throw ContractViolation("softmax_logprob: action " + std::to_string(action) +
                            " out of range for " +
                            std::to_string(logits.size()) + " logits");
  return logits[action] - log_sum_exp(logits);
}

inline double entropy(std::span<const double> logits) {
  detail::require(!logits.empty(), "entropy: empty logits");
  const double lse = log_sum_exp(logits);
  double h = 0.0;
  for (double z : logits) {
    const double lp = z - lse;
    const double p = std::exp(lp);
    if (p > 0.0) h -= p * lp;
  }
  return std::max(h, 0.0);
}

/// A loss over the outputs of a batch. Returns the batch loss and writes
/// dLoss/d(output) for every sample.
template <class L>
concept OutputLoss = requires(const L& loss, std::span<const PolicyOutput> out,
                              std::span<OutputGradient> grad) {
  { loss(out, grad) } -> std::convertible_to<double>;
};

/// Losses may also carry a term that depends directly on the parameters.
template <class L>
concept HasParameterTerm =
    requires(const L& loss, const ParameterVector& p, ParameterVector& g) {
      { loss.parameter_term(p, g) } -> std::convertible_to<double>;
    };

struct LossGradient {
  double loss = 0.0;
  ParameterVector gradient;
};

/// Reverse-mode gradient of `loss` with respect to every parameter.
template <OutputLoss Loss>
LossGradient backward(const ParameterVector& params, const NetworkSpec& spec,
                      std::span<const std::span<const double>> observations,
                      const Loss& loss) {
  if (observations.empty()) throw ContractViolation("backward: empty batch");
  if (!params.matches(spec))
    throw ContractViolation("backward: parameters do not match network layout");

  std::vector<detail::ForwardTrace> traces;
  traces.reserve(observations.size());
  std::vector<PolicyOutput> outputs;
  outputs.reserve(observations.size());
  for (auto obs : observations) {
    detail::check_inputs(params, spec, obs);
    traces.push_back(detail::forward_trace(params, spec, obs, true));
    outputs.push_back(traces.back().output);
  }

  std::vector<OutputGradient> out_grads(observations.size());
  for (auto& g : out_grads) g.dlogits.assign(spec.action_count, 0.0);

  LossGradient result{0.0, ParameterVector(params.layout())};
  result.loss = loss(std::span<const PolicyOutput>(outputs),
                     std::span<OutputGradient>(out_grads));
  if constexpr (HasParameterTerm<Loss>)
    result.loss += loss.parameter_term(params, result.gradient);

  const std::size_t depth = spec.trunk_depth();
  auto grad = result.gradient.values();
  std::vector<std::size_t> offsets(params.layout().size());
  for (std::size_t l = 0; l < offsets.size(); ++l)
    offsets[l] = params.offset(l);

  std::vector<double> delta, next_delta;
  for (std::size_t s = 0; s < observations.size(); ++s) {
    const auto& trace = traces[s];
    const auto& og = out_grads[s];
    const auto& top = trace.activations.back();
    const std::size_t width = top.size();
    std::vector<double> dtop(width, 0.0);

    // Policy head.
    {
      const auto& shape = params.layout()[depth];
      double* gw = grad.data() + offsets[depth];
      double* gb = gw + shape.rows * shape.cols;
      auto w = params.weights(depth);
      for (std::size_t r = 0; r < shape.rows; ++r) {
        const double d = og.dlogits[r];
        if (d == 0.0) continue;
        for (std::size_t c = 0; c < width; ++c) {
          gw[r * width + c] += d * top[c];
          dtop[c] += d * w[r * width + c];
        }
        gb[r] += d;
      }
    }
    // Value head.
    if (og.dvalue != 0.0) {
      double* gw = grad.data() + offsets[depth + 1];
      auto w = params.weights(depth + 1);
      for (std::size_t c = 0; c < width; ++c) {
        gw[c] += og.dvalue * top[c];
        dtop[c] += og.dvalue * w[c];
      }
      gw[width] += og.dvalue;
    }

    // Trunk, top to bottom. activations[l + 1] = tanh(W_l a_l + b_l).
    delta = std::move(dtop);
    for (std::size_t l = depth; l-- > 0;) {
      const auto& out = trace.activations[l + 1];
      const auto& in = trace.activations[l];
      for (std::size_t r = 0; r < out.size(); ++r)
        delta[r] *= 1.0 - out[r] * out[r];
      const auto& shape = params.layout()[l];
      double* gw = grad.data() + offsets[l];
      double* gb = gw + shape.rows * shape.cols;
      auto w = params.weights(l);
      const bool need_input_grad = l > 0;
      if (need_input_grad) next_delta.assign(in.size(), 0.0);
      for (std::size_t r = 0; r < shape.rows; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        const double* wrow = w.data() + r * shape.cols;
        double* grow = gw + r * shape.cols;
        for (std::size_t c = 0; c < shape.cols; ++c) grow[c] += d * in[c];
        if (need_input_grad)
          for (std::size_t c = 0; c < shape.cols; ++c)
            next_delta[c] += d * wrow[c];
        gb[r] += d;
      }
      if (need_input_grad) std::swap(delta, next_delta);
    }
  }

  if (!std::isfinite(result.loss))
    throw NumericalError("backward: non-finite loss");
  for (std::size_t l = 0; l < params.layout().size(); ++l) {
    auto g = std::span<const double>(grad).subspan(offsets[l],
                                                   params.layout()[l].size());
    detail::check_finite(g, spec, l, "gradient");
  }
  return result;
}

/// Overload for callers holding observations as vectors.
template <OutputLoss Loss>
LossGradient backward(const ParameterVector& params, const NetworkSpec& spec,
                      const std::vector<std::vector<double>>& observations,
                      const Loss& loss) {
  std::vector<std::span<const double>> views(observations.begin(),
                                             observations.end());
  return backward(params, spec, std::span<const std::span<const double>>(views),
                  loss);
}

namespace detail {

// Fills a rows x cols row-major matrix with an orthonormal set of rows (if
// rows <= cols) or columns, scaled by `gain`. Modified Gram-Schmidt over
// Gaussian draws.
inline void orthogonal_fill(std::span<double> w, std::size_t rows,
                            std::size_t cols, double gain, Rng& rng) {
  const std::size_t n = std::max(rows, cols);  // vector length
  const std::size_t k = std::min(rows, cols);  // vector count
  std::vector<std::vector<double>> basis;
  basis.reserve(k);
  while (basis.size() < k) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    for (const auto& b : basis) {
      const double d = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
      for (std::size_t i = 0; i < n; ++i) v[i] -= d * b[i];
    }
    const double norm =
        std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm < 1e-10) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      w[r * cols + c] =
          gain * (rows <= cols ? basis[r][c] : basis[c][r]);
}

}  // namespace detail

/// Orthogonal init: trunk gain sqrt(2), policy head 0.01, value head 1,
/// zero biases.
inline ParameterVector initialize_parameters(const NetworkSpec& spec, Rng& rng) {
  ParameterVector p = ParameterVector::zeros(spec);
  const auto& layout = p.layout();
  for (std::size_t l = 0; l < layout.size(); ++l) {
    double gain = std::sqrt(2.0);
    if (l == spec.trunk_depth()) gain = 0.01;
    if (l == spec.trunk_depth() + 1) gain = 1.0;
    detail::orthogonal_fill(p.values().subspan(p.offset(l),
                                               layout[l].rows * layout[l].cols),
                            layout[l].rows, layout[l].cols, gain, rng);
  }
  return p;
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace epo

#endif  // EPO_NN_HPP_
