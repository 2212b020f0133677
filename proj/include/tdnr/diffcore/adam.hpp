/*
 * Copyright 2026 The TDNR Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TDNR_DIFFCORE_ADAM_HPP_
#define TDNR_DIFFCORE_ADAM_HPP_

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tdnr/diffcore/tensor.hpp"
#include "tdnr/errors.hpp"

namespace tdnr {

struct AdamOptions {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment estimates, one pair per parameter in registration
// order, plus the number of steps taken.
template <typename T>
struct AdamState {
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  std::uint64_t step = 0;

  static AdamState for_parameters(std::span<Parameter<T>* const> params) {
    AdamState state;
    for (const Parameter<T>* p : params) {
      state.first_moment.emplace_back(p->value.shape());
      state.second_moment.emplace_back(p->value.shape());
    }
    return state;
  }
};

// Bias-corrected Adam update using each parameter's accumulated gradient.
template <typename T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state,
               const AdamOptions& options) {
  if (state.first_moment.empty() && state.step == 0) {
    state = AdamState<T>::for_parameters(params);
  }
  if (state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ShapeError("adam_step: state tracks " +
                     std::to_string(state.first_moment.size()) +
                     " parameters, given " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter<T>& p = *params[i];
    if (!p.grad.same_shape(p.value) || !state.first_moment[i].same_shape(p.value) ||
        !state.second_moment[i].same_shape(p.value)) {
      throw ShapeError("adam_step: parameter '" + p.name + "' " +
                       shape_string(p.value.shape()) + " grad " +
                       shape_string(p.grad.shape()) + " moment " +
                       shape_string(state.first_moment[i].shape()));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(options.beta1, t);
  const double correction2 = 1.0 - std::pow(options.beta2, t);
  const T b1 = static_cast<T>(options.beta1);
  const T b2 = static_cast<T>(options.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = *params[i];
    auto m = state.first_moment[i].values();
    auto v = state.second_moment[i].values();
    auto w = p.value.values();
    auto g = p.grad.values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * g[k];
      v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
      const double m_hat = static_cast<double>(m[k]) / correction1;
      const double v_hat = static_cast<double>(v[k]) / correction2;
      w[k] -= static_cast<T>(options.lr * m_hat / (std::sqrt(v_hat) + options.epsilon));
    }
  }
}

}  // namespace tdnr

#endif  // TDNR_DIFFCORE_ADAM_HPP_
