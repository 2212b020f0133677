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

#ifndef TDNR_DIFFCORE_GRADCHECK_HPP_
#define TDNR_DIFFCORE_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "tdnr/diffcore/tape.hpp"
#include "tdnr/diffcore/tensor.hpp"

namespace tdnr {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
  // ||analytic - numeric|| / max(||analytic||, ||numeric||) over all
  // coordinates. Unlike the per-coordinate maximum it stays meaningful when
  // some gradients are smaller than the precision of T can resolve.
  double norm_relative_error = 0.0;
};

inline double relative_gradient_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / scale;
}

// Compares reverse-mode gradients of `loss` against central differences for
// every coordinate of every listed parameter. `loss(tape)` must build the
// scalar on the given tape from the parameters.
template <typename T, typename LossFn>
GradCheckReport finite_difference_check(LossFn&& loss,
                                        std::span<Parameter<T>* const> params,
                                        double eps) {
  for (Parameter<T>* p : params) p->zero_grad();
  {
    Tape<T> tape;
    tape.backward(loss(tape));
  }
  auto evaluate = [&loss]() {
    Tape<T> tape;
    return static_cast<double>(tape.value(loss(tape)).item());
  };

  GradCheckReport report;
  double diff_sq = 0.0, analytic_sq = 0.0, numeric_sq = 0.0;
  for (Parameter<T>* p : params) {
    auto values = p->value.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T original = values[i];
      // The step is measured on the stored scalars, which at 32 bits differ
      // from original +- eps by rounding.
      const T plus = static_cast<T>(original + eps);
      const T minus = static_cast<T>(original - eps);
      values[i] = plus;
      const double up = evaluate();
      values[i] = minus;
      const double down = evaluate();
      values[i] = original;
      const double numeric = (up - down) / (static_cast<double>(plus) - static_cast<double>(minus));
      const double analytic = static_cast<double>(p->grad[i]);
      const double err = relative_gradient_error(analytic, numeric);
      ++report.coordinates;
      diff_sq += (analytic - numeric) * (analytic - numeric);
      analytic_sq += analytic * analytic;
      numeric_sq += numeric * numeric;
      if (err > report.max_relative_error || report.coordinates == 1) {
        report.max_relative_error = std::max(report.max_relative_error, err);
        report.worst_parameter = p->name;
        report.worst_index = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  const double scale = std::sqrt(std::max({analytic_sq, numeric_sq, 1e-16}));
  report.norm_relative_error = std::sqrt(diff_sq) / scale;
  return report;
}

// Single-input form: `fn(tape, x)` maps a tensor to a scalar.
template <typename T, typename Fn>
GradCheckReport finite_difference_check(Fn&& fn, const Tensor<T>& x, double eps) {
  Parameter<T> input("x", x);
  auto loss = [&](Tape<T>& tape) { return fn(tape, tape.parameter(input)); };
  Parameter<T>* list[] = {&input};
  return finite_difference_check<T>(loss, std::span<Parameter<T>* const>(list), eps);
}

}  // namespace tdnr

#endif  // TDNR_DIFFCORE_GRADCHECK_HPP_
