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

#ifndef TDNR_DIFFCORE_TENSOR_HPP_
#define TDNR_DIFFCORE_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tdnr/errors.hpp"

namespace tdnr {

// Dense row-major array. Rank-1 tensors behave as a single row when an
// operation needs a matrix view.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), values_(element_count(shape_), T(0)) {}

  Tensor(std::vector<std::size_t> shape, std::vector<T> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (element_count(shape_) != values_.size()) {
      throw ShapeError("tensor " + shape_string(shape_) + " given " +
                       std::to_string(values_.size()) + " values");
    }
  }

  static Tensor zeros(std::size_t rows, std::size_t cols) {
    return Tensor({rows, cols});
  }
  static Tensor filled(std::size_t rows, std::size_t cols, T value) {
    return Tensor({rows, cols}, std::vector<T>(rows * cols, value));
  }
  static Tensor scalar(T value) { return Tensor({1, 1}, {value}); }
  static Tensor row(std::vector<T> values) {
    const std::size_t n = values.size();
    return Tensor({1, n}, std::move(values));
  }
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<T> values) {
    return Tensor({rows, cols}, std::move(values));
  }
  static Tensor identity(std::size_t n) {
    Tensor out = zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = T(1);
    return out;
  }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::size_t rows() const noexcept {
    if (shape_.empty()) return values_.empty() ? 0 : 1;
    if (shape_.size() == 1) return 1;
    return std::accumulate(shape_.begin(), shape_.end() - 1, std::size_t{1},
                           std::multiplies<>());
  }
  std::size_t cols() const noexcept {
    return shape_.empty() ? (values_.empty() ? 0 : 1) : shape_.back();
  }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  std::vector<T>& storage() noexcept { return values_; }
  const std::vector<T>& storage() const noexcept { return values_; }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  T& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols() + c];
  }

  std::span<T> row_span(std::size_t r) {
    return std::span<T>(values_).subspan(r * cols(), cols());
  }
  std::span<const T> row_span(std::size_t r) const {
    return std::span<const T>(values_).subspan(r * cols(), cols());
  }

  T item() const {
    if (values_.size() != 1) {
      throw ShapeError("item() on tensor " + shape_string(shape_));
    }
    return values_[0];
  }

  void fill(T value) { std::fill(values_.begin(), values_.end(), value); }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  template <typename U>
  Tensor<U> cast() const {
    return Tensor<U>(shape_, std::vector<U>(values_.begin(), values_.end()));
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  static std::size_t element_count(const std::vector<std::size_t>& shape) {
    if (shape.empty()) return 0;
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
  }

  std::vector<std::size_t> shape_;
  std::vector<T> values_;
};

// A trainable tensor with its gradient accumulator.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() {
    if (!grad.same_shape(value)) grad = Tensor<T>(value.shape());
    grad.fill(T(0));
  }
};

}  // namespace tdnr

#endif  // TDNR_DIFFCORE_TENSOR_HPP_
