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

// Reverse-mode differentiation over a per-step recorded computation.
//
// Every operation appends a node to the tape holding its forward value and a
// closure that scatters the node's gradient into its inputs. Nodes are
// created in topological order, so `backward` simply walks the tape in
// reverse. Parameters are referenced, not copied: their gradients land in
// `Parameter::grad` and accumulate across `backward` calls until reset.
//
// All values are rank-2 (rows x cols). A scalar is 1x1 and a vector is 1xd.

#ifndef TDNR_DIFFCORE_TAPE_HPP_
#define TDNR_DIFFCORE_TAPE_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tdnr/diffcore/tensor.hpp"
#include "tdnr/errors.hpp"

namespace tdnr {

// Boolean mask with contiguous storage; nonzero means "attend / keep".
using Mask = std::vector<std::uint8_t>;

struct Var {
  static constexpr std::size_t kInvalid = std::numeric_limits<std::size_t>::max();
  std::size_t id = kInvalid;
  bool valid() const noexcept { return id != kInvalid; }
};

inline constexpr double kNormEpsilon = 1e-12;

template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves -------------------------------------------------------------

  Var constant(Tensor<T> value) { return push(to_matrix(std::move(value)), false); }

  Var parameter(Parameter<T>& param) {
    Var v = push(to_matrix(param.value), true);
    Parameter<T>* target = &param;
    nodes_[v.id].backprop = [target](Tape& tape, std::size_t self) {
      auto& g = tape.nodes_[self].grad;
      if (!target->grad.same_shape(target->value)) target->zero_grad();
      auto dst = target->grad.values();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    };
    return v;
  }

  // ---- accessors ----------------------------------------------------------

  const Tensor<T>& value(Var v) const { return node(v).value; }
  // Gradient of the last `backward` target with respect to `v`; zeros when
  // no gradient reached it.
  Tensor<T> grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.empty()) return Tensor<T>(n.value.shape());
    return n.grad;
  }
  std::size_t size() const noexcept { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // ---- linear algebra -----------------------------------------------------

  // Eight independent partial sums let the compiler vectorize the reduction;
  // the summation order is fixed, so results stay deterministic.
  static T dot_kernel(const T* x, const T* y, std::size_t n) {
    T part[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
      for (std::size_t l = 0; l < 8; ++l) part[l] += x[i + l] * y[i + l];
    }
    T acc = ((part[0] + part[1]) + (part[2] + part[3])) + ((part[4] + part[5]) + (part[6] + part[7]));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
  }

  Var matmul(Var a, Var b) {
    const auto& A = value(a);
    const auto& B = value(b);
    if (A.cols() != B.rows()) {
      throw ShapeError("matmul: " + shape_string(A.shape()) + " x " +
                       shape_string(B.shape()));
    }
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor<T> C = Tensor<T>::zeros(m, n);
    for (std::size_t i = 0; i < m; ++i) {
      T* crow = &C(i, 0);
      for (std::size_t p = 0; p < k; ++p) {
        const T av = A(i, p);
        if (av == T(0)) continue;
        const T* brow = &B(p, 0);
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
    return record(std::move(C), {a, b}, [a, b, m, k, n](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      if (t.wants(a)) {
        const auto& B = t.value(b);
        auto& dA = t.grad_ref(a);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            dA(i, p) += dot_kernel(&G(i, 0), &B(p, 0), n);
          }
        }
      }
      if (t.wants(b)) {
        const auto& A = t.value(a);
        auto& dB = t.grad_ref(b);
        for (std::size_t i = 0; i < m; ++i) {
          const T* g = &G(i, 0);
          for (std::size_t p = 0; p < k; ++p) {
            const T av = A(i, p);
            if (av == T(0)) continue;
            T* drow = &dB(p, 0);
            for (std::size_t j = 0; j < n; ++j) drow[j] += av * g[j];
          }
        }
      }
    });
  }

  // a (m x k) times b^T where b is (n x k).
  Var matmul_nt(Var a, Var b) {
    const auto& A = value(a);
    const auto& B = value(b);
    if (A.cols() != B.cols()) {
      throw ShapeError("matmul_nt: " + shape_string(A.shape()) + " x " +
                       shape_string(B.shape()) + "^T");
    }
    const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
    Tensor<T> C = Tensor<T>::zeros(m, n);
    for (std::size_t i = 0; i < m; ++i) {
      const T* arow = &A(i, 0);
      for (std::size_t j = 0; j < n; ++j) {
        C(i, j) = dot_kernel(arow, &B(j, 0), k);
      }
    }
    return record(std::move(C), {a, b}, [a, b, m, k, n](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      if (t.wants(a)) {
        const auto& B = t.value(b);
        auto& dA = t.grad_ref(a);
        for (std::size_t i = 0; i < m; ++i) {
          T* drow = &dA(i, 0);
          for (std::size_t j = 0; j < n; ++j) {
            const T g = G(i, j);
            if (g == T(0)) continue;
            const T* brow = &B(j, 0);
            for (std::size_t p = 0; p < k; ++p) drow[p] += g * brow[p];
          }
        }
      }
      if (t.wants(b)) {
        const auto& A = t.value(a);
        auto& dB = t.grad_ref(b);
        for (std::size_t i = 0; i < m; ++i) {
          const T* arow = &A(i, 0);
          for (std::size_t j = 0; j < n; ++j) {
            const T g = G(i, j);
            if (g == T(0)) continue;
            T* drow = &dB(j, 0);
            for (std::size_t p = 0; p < k; ++p) drow[p] += g * arow[p];
          }
        }
      }
    });
  }

  // ---- elementwise --------------------------------------------------------

  Var add(Var a, Var b) { return binary(a, b, "add", T(1), T(1)); }
  Var sub(Var a, Var b) { return binary(a, b, "sub", T(1), T(-1)); }

  Var mul(Var a, Var b) {
    const auto& A = value(a);
    const auto& B = value(b);
    const bool scalar_b = B.size() == 1 && A.size() != 1;
    if (!scalar_b && !A.same_shape(B)) {
      throw ShapeError("mul: " + shape_string(A.shape()) + " vs " +
                       shape_string(B.shape()));
    }
    Tensor<T> C(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) {
      C[i] = A[i] * (scalar_b ? B[0] : B[i]);
    }
    return record(std::move(C), {a, b}, [a, b, scalar_b](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      const auto& A = t.value(a);
      const auto& B = t.value(b);
      if (t.wants(a)) {
        auto& dA = t.grad_ref(a);
        for (std::size_t i = 0; i < G.size(); ++i) {
          dA[i] += G[i] * (scalar_b ? B[0] : B[i]);
        }
      }
      if (t.wants(b)) {
        auto& dB = t.grad_ref(b);
        for (std::size_t i = 0; i < G.size(); ++i) {
          dB[scalar_b ? 0 : i] += G[i] * A[i];
        }
      }
    });
  }

  // a * scale + shift, elementwise.
  Var affine(Var a, T scale, T shift = T(0)) {
    const auto& A = value(a);
    Tensor<T> C(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] * scale + shift;
    return record(std::move(C), {a}, [a, scale](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      auto& dA = t.grad_ref(a);
      for (std::size_t i = 0; i < G.size(); ++i) dA[i] += G[i] * scale;
    });
  }
  Var scale(Var a, T factor) { return affine(a, factor, T(0)); }

  Var tanh(Var a) {
    const auto& A = value(a);
    Tensor<T> C(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) C[i] = std::tanh(A[i]);
    return record(std::move(C), {a}, [a](Tape& t, std::size_t self) {
      const auto& n = t.nodes_[self];
      auto& dA = t.grad_ref(a);
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        const T y = n.value[i];
        dA[i] += n.grad[i] * (T(1) - y * y);
      }
    });
  }

  Var exp(Var a) {
    const auto& A = value(a);
    Tensor<T> C(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) C[i] = std::exp(A[i]);
    return record(std::move(C), {a}, [a](Tape& t, std::size_t self) {
      const auto& n = t.nodes_[self];
      auto& dA = t.grad_ref(a);
      for (std::size_t i = 0; i < n.grad.size(); ++i) dA[i] += n.grad[i] * n.value[i];
    });
  }

  Var log(Var a) {
    const auto& A = value(a);
    Tensor<T> C(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) {
      if (!(A[i] > T(0))) {
        throw DomainError("log of non-positive value " + std::to_string(A[i]));
      }
      C[i] = std::log(A[i]);
    }
    return record(std::move(C), {a}, [a](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      const auto& A = t.value(a);
      auto& dA = t.grad_ref(a);
      for (std::size_t i = 0; i < G.size(); ++i) dA[i] += G[i] / A[i];
    });
  }

  // x^exponent for x >= 0.
  Var pow(Var a, T exponent) {
    const auto& A = value(a);
    Tensor<T> C(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) {
      if (A[i] < T(0)) {
        throw DomainError("pow of negative value " + std::to_string(A[i]));
      }
      C[i] = std::pow(A[i], exponent);
    }
    return record(std::move(C), {a}, [a, exponent](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      const auto& A = t.value(a);
      auto& dA = t.grad_ref(a);
      for (std::size_t i = 0; i < G.size(); ++i) {
        if (exponent == T(0)) continue;
        if (A[i] == T(0) && exponent < T(1)) continue;  // subgradient 0
        dA[i] += G[i] * exponent * std::pow(A[i], exponent - T(1));
      }
    });
  }

  // ---- broadcasting -------------------------------------------------------

  // a (m x n) + bias (1 x n) on every row.
  Var add_row(Var a, Var bias) {
    const auto& A = value(a);
    const auto& B = value(bias);
    if (B.rows() != 1 || B.cols() != A.cols()) {
      throw ShapeError("add_row: " + shape_string(A.shape()) + " + " +
                       shape_string(B.shape()));
    }
    Tensor<T> C = A;
    const std::size_t m = A.rows(), n = A.cols();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) C(i, j) += B[j];
    return record(std::move(C), {a, bias}, [a, bias, m, n](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      if (t.wants(a)) {
        auto& dA = t.grad_ref(a);
        for (std::size_t i = 0; i < G.size(); ++i) dA[i] += G[i];
      }
      if (t.wants(bias)) {
        auto& dB = t.grad_ref(bias);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) dB[j] += G(i, j);
      }
    });
  }

  // a (m x n) with row i scaled by col (m x 1)[i].
  Var mul_col(Var a, Var col) {
    const auto& A = value(a);
    const auto& c = value(col);
    if (c.cols() != 1 || c.rows() != A.rows()) {
      throw ShapeError("mul_col: " + shape_string(A.shape()) + " * " +
                       shape_string(c.shape()));
    }
    const std::size_t m = A.rows(), n = A.cols();
    Tensor<T> C(A.shape());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) C(i, j) = A(i, j) * c[i];
    return record(std::move(C), {a, col}, [a, col, m, n](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      const auto& A = t.value(a);
      const auto& c = t.value(col);
      if (t.wants(a)) {
        auto& dA = t.grad_ref(a);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) dA(i, j) += G(i, j) * c[i];
      }
      if (t.wants(col)) {
        auto& dc = t.grad_ref(col);
        for (std::size_t i = 0; i < m; ++i) {
          T acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += G(i, j) * A(i, j);
          dc[i] += acc;
        }
      }
    });
  }

  // ---- normalization ------------------------------------------------------

  // Row-wise softmax over positions where mask is set; masked outputs are
  // exactly zero. The mask applies to every row (it indexes columns).
  Var softmax_masked(Var x, std::span<const std::uint8_t> mask) {
    const auto& X = value(x);
    const std::size_t m = X.rows(), n = X.cols();
    if (mask.size() != n) {
      throw ShapeError("softmax_masked: mask length " + std::to_string(mask.size()) +
                       " for " + shape_string(X.shape()));
    }
    bool any = false;
    for (auto flag : mask) any = any || flag;
    if (!any) throw DegenerateError("softmax over a fully-masked row");
    Tensor<T> Y(X.shape());
    for (std::size_t i = 0; i < m; ++i) {
      T peak = -std::numeric_limits<T>::infinity();
      for (std::size_t j = 0; j < n; ++j)
        if (mask[j]) peak = std::max(peak, X(i, j));
      T total = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (!mask[j]) continue;
        Y(i, j) = std::exp(X(i, j) - peak);
        total += Y(i, j);
      }
      for (std::size_t j = 0; j < n; ++j) Y(i, j) /= total;
    }
    return record(std::move(Y), {x}, [x, m, n](Tape& t, std::size_t self) {
      const auto& node = t.nodes_[self];
      auto& dX = t.grad_ref(x);
      for (std::size_t i = 0; i < m; ++i) {
        T inner = 0;
        for (std::size_t j = 0; j < n; ++j) inner += node.value(i, j) * node.grad(i, j);
        for (std::size_t j = 0; j < n; ++j) {
          dX(i, j) += node.value(i, j) * (node.grad(i, j) - inner);
        }
      }
    });
  }

  Var softmax(Var x) {
    Mask all(value(x).cols(), 1);
    return softmax_masked(x, all);
  }

  // Row-wise log-softmax, max-shifted.
  Var log_softmax(Var x) {
    const auto& X = value(x);
    const std::size_t m = X.rows(), n = X.cols();
    Tensor<T> Y(X.shape());
    for (std::size_t i = 0; i < m; ++i) {
      T peak = X(i, 0);
      for (std::size_t j = 1; j < n; ++j) peak = std::max(peak, X(i, j));
      T total = 0;
      for (std::size_t j = 0; j < n; ++j) total += std::exp(X(i, j) - peak);
      const T lse = peak + std::log(total);
      for (std::size_t j = 0; j < n; ++j) Y(i, j) = X(i, j) - lse;
    }
    return record(std::move(Y), {x}, [x, m, n](Tape& t, std::size_t self) {
      const auto& node = t.nodes_[self];
      auto& dX = t.grad_ref(x);
      for (std::size_t i = 0; i < m; ++i) {
        T gsum = 0;
        for (std::size_t j = 0; j < n; ++j) gsum += node.grad(i, j);
        for (std::size_t j = 0; j < n; ++j) {
          dX(i, j) += node.grad(i, j) - std::exp(node.value(i, j)) * gsum;
        }
      }
    });
  }

  // Every row scaled to unit Euclidean norm.
  Var l2_normalize(Var x) {
    const auto& X = value(x);
    const std::size_t m = X.rows(), n = X.cols();
    Tensor<T> Y(X.shape());
    std::vector<T> norms(m);
    for (std::size_t i = 0; i < m; ++i) {
      T sq = 0;
      for (std::size_t j = 0; j < n; ++j) sq += X(i, j) * X(i, j);
      norms[i] = std::sqrt(sq);
      if (!std::isfinite(norms[i])) throw NumericError("l2_normalize of a non-finite vector");
      if (!(norms[i] > T(kNormEpsilon))) {
        throw DegenerateError("l2_normalize of a near-zero vector");
      }
      for (std::size_t j = 0; j < n; ++j) Y(i, j) = X(i, j) / norms[i];
    }
    return record(std::move(Y), {x},
                  [x, m, n, norms = std::move(norms)](Tape& t, std::size_t self) {
      const auto& node = t.nodes_[self];
      auto& dX = t.grad_ref(x);
      for (std::size_t i = 0; i < m; ++i) {
        T inner = 0;
        for (std::size_t j = 0; j < n; ++j) inner += node.value(i, j) * node.grad(i, j);
        for (std::size_t j = 0; j < n; ++j) {
          dX(i, j) += (node.grad(i, j) - node.value(i, j) * inner) / norms[i];
        }
      }
    });
  }

  // ---- structure ----------------------------------------------------------

  Var concat_last(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_last of no parts");
    const std::size_t m = value(parts[0]).rows();
    std::size_t total = 0;
    for (Var p : parts) {
      if (value(p).rows() != m) {
        throw ShapeError("concat_last: " + shape_string(value(parts[0]).shape()) +
                         " vs " + shape_string(value(p).shape()));
      }
      total += value(p).cols();
    }
    Tensor<T> C = Tensor<T>::zeros(m, total);
    std::vector<std::size_t> offsets;
    std::size_t offset = 0;
    for (Var p : parts) {
      const auto& P = value(p);
      offsets.push_back(offset);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < P.cols(); ++j) C(i, offset + j) = P(i, j);
      offset += P.cols();
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return record(std::move(C), inputs,
                  [inputs, offsets, m](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (!t.wants(inputs[k])) continue;
        auto& dP = t.grad_ref(inputs[k]);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < dP.cols(); ++j) dP(i, j) += G(i, offsets[k] + j);
      }
    });
  }
  Var concat_last(std::initializer_list<Var> parts) {
    std::vector<Var> v(parts);
    return concat_last(std::span<const Var>(v));
  }

  Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw ShapeError("concat_rows of no parts");
    const std::size_t n = value(parts[0]).cols();
    std::size_t total = 0;
    for (Var p : parts) {
      if (value(p).cols() != n) {
        throw ShapeError("concat_rows: " + shape_string(value(parts[0]).shape()) +
                         " vs " + shape_string(value(p).shape()));
      }
      total += value(p).rows();
    }
    std::vector<T> data;
    data.reserve(total * n);
    for (Var p : parts) {
      const auto& vals = value(p).storage();
      data.insert(data.end(), vals.begin(), vals.end());
    }
    std::vector<Var> inputs(parts.begin(), parts.end());
    return record(Tensor<T>::matrix(total, n, std::move(data)), inputs,
                  [inputs](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      std::size_t offset = 0;
      for (Var p : inputs) {
        const std::size_t count = t.value(p).size();
        if (t.wants(p)) {
          auto& dP = t.grad_ref(p);
          for (std::size_t i = 0; i < count; ++i) dP[i] += G[offset + i];
        }
        offset += count;
      }
    });
  }

  Var slice_cols(Var a, std::size_t start, std::size_t count) {
    const auto& A = value(a);
    if (start + count > A.cols() || count == 0) {
      throw ShapeError("slice_cols [" + std::to_string(start) + ", +" +
                       std::to_string(count) + ") of " + shape_string(A.shape()));
    }
    const std::size_t m = A.rows();
    Tensor<T> C = Tensor<T>::zeros(m, count);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) C(i, j) = A(i, start + j);
    return record(std::move(C), {a}, [a, start, count, m](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      auto& dA = t.grad_ref(a);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j) dA(i, start + j) += G(i, j);
    });
  }

  Var gather_rows(Var a, std::span<const std::size_t> indices) {
    const auto& A = value(a);
    const std::size_t n = A.cols();
    Tensor<T> C = Tensor<T>::zeros(indices.size(), n);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      if (indices[r] >= A.rows()) {
        throw ShapeError("gather_rows index " + std::to_string(indices[r]) +
                         " out of " + shape_string(A.shape()));
      }
      for (std::size_t j = 0; j < n; ++j) C(r, j) = A(indices[r], j);
    }
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    return record(std::move(C), {a}, [a, idx = std::move(idx), n](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      auto& dA = t.grad_ref(a);
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < n; ++j) dA(idx[r], j) += G(r, j);
    });
  }

  // One element per row: out[i] = a[i, cols[i]], shape (m x 1).
  Var pick(Var a, std::span<const std::size_t> cols) {
    const auto& A = value(a);
    if (cols.size() != A.rows()) {
      throw ShapeError("pick: " + std::to_string(cols.size()) + " indices for " +
                       shape_string(A.shape()));
    }
    Tensor<T> C = Tensor<T>::zeros(A.rows(), 1);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (cols[i] >= A.cols()) throw ShapeError("pick column out of range");
      C[i] = A(i, cols[i]);
    }
    std::vector<std::size_t> idx(cols.begin(), cols.end());
    return record(std::move(C), {a}, [a, idx = std::move(idx)](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      auto& dA = t.grad_ref(a);
      for (std::size_t i = 0; i < idx.size(); ++i) dA(i, idx[i]) += G[i];
    });
  }

  // ---- pooling and reductions ---------------------------------------------

  // Mean of the rows whose mask is set; all-false mask yields zeros.
  Var mean_pool(Var rows, std::span<const std::uint8_t> mask) {
    const auto& R = value(rows);
    const std::size_t n = R.rows(), d = R.cols();
    if (mask.size() != n) throw ShapeError("mean_pool: mask length mismatch");
    std::size_t count = 0;
    for (auto flag : mask) count += flag ? 1 : 0;
    Tensor<T> C = Tensor<T>::zeros(1, d);
    if (count == 0) return push(std::move(C), false);
    const T inv = T(1) / static_cast<T>(count);
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask[i]) continue;
      for (std::size_t j = 0; j < d; ++j) C[j] += R(i, j) * inv;
    }
    Mask keep(mask.begin(), mask.end());
    return record(std::move(C), {rows},
                  [rows, keep = std::move(keep), inv, d](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      auto& dR = t.grad_ref(rows);
      for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        for (std::size_t j = 0; j < d; ++j) dR(i, j) += G[j] * inv;
      }
    });
  }

  // Mean embedding per row of `ids` (row-major, `width` ids per row). Id 0 is
  // padding and never contributes; an all-padding row pools to zeros.
  Var embedding_bag(Parameter<T>& table, std::span<const std::int32_t> ids,
                    std::size_t width) {
    const std::size_t vocab = table.value.rows(), d = table.value.cols();
    if (width == 0 || ids.size() % width != 0) {
      throw ShapeError("embedding_bag: " + std::to_string(ids.size()) +
                       " ids not divisible into rows of " + std::to_string(width));
    }
    const std::size_t m = ids.size() / width;
    Tensor<T> C = Tensor<T>::zeros(m, d);
    std::vector<T> inv(m, T(0));
    for (std::size_t r = 0; r < m; ++r) {
      std::size_t count = 0;
      for (std::size_t c = 0; c < width; ++c) {
        const auto id = ids[r * width + c];
        if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
          throw ContractError("token id " + std::to_string(id) +
                              " outside vocabulary of " + std::to_string(vocab));
        }
        if (id != 0) ++count;
      }
      if (count == 0) continue;
      inv[r] = T(1) / static_cast<T>(count);
      for (std::size_t c = 0; c < width; ++c) {
        const auto id = ids[r * width + c];
        if (id == 0) continue;
        const T* src = &table.value(static_cast<std::size_t>(id), 0);
        for (std::size_t j = 0; j < d; ++j) C(r, j) += src[j] * inv[r];
      }
    }
    std::vector<std::int32_t> copy(ids.begin(), ids.end());
    Parameter<T>* target = &table;
    Var v = push(std::move(C), true);
    nodes_[v.id].backprop = [target, copy = std::move(copy), inv = std::move(inv), width,
                             d](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      if (!target->grad.same_shape(target->value)) target->zero_grad();
      for (std::size_t r = 0; r < inv.size(); ++r) {
        if (inv[r] == T(0)) continue;
        for (std::size_t c = 0; c < width; ++c) {
          const auto id = copy[r * width + c];
          if (id == 0) continue;
          T* dst = &target->grad(static_cast<std::size_t>(id), 0);
          for (std::size_t j = 0; j < d; ++j) dst[j] += G(r, j) * inv[r];
        }
      }
    };
    return v;
  }

  Var sum(Var a) {
    const auto& A = value(a);
    T total = 0;
    for (T v : A.values()) total += v;
    return record(Tensor<T>::scalar(total), {a}, [a](Tape& t, std::size_t self) {
      const T g = t.nodes_[self].grad[0];
      auto& dA = t.grad_ref(a);
      for (std::size_t i = 0; i < dA.size(); ++i) dA[i] += g;
    });
  }

  Var mean(Var a) {
    const std::size_t n = value(a).size();
    if (n == 0) throw ShapeError("mean of empty tensor");
    return scale(sum(a), T(1) / static_cast<T>(n));
  }

  // Inner product of two equal-shape tensors, as a 1x1 scalar.
  Var dot(Var a, Var b) {
    if (!value(a).same_shape(value(b))) {
      throw ShapeError("dot: " + shape_string(value(a).shape()) + " vs " +
                       shape_string(value(b).shape()));
    }
    return sum(mul(a, b));
  }

  // ---- differentiation ----------------------------------------------------

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  // Parameter gradients accumulate; intermediate gradients are recomputed.
  void backward(Var loss) {
    if (value(loss).size() != 1) {
      throw ContractError("backward needs a scalar loss, got " +
                          shape_string(value(loss).shape()));
    }
    for (auto& n : nodes_) n.grad = Tensor<T>();
    grad_ref(loss)[0] = T(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.grad.empty() || !n.needs_grad || !n.backprop) continue;
      n.backprop(*this, i);
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
    std::function<void(Tape&, std::size_t)> backprop;
  };

  static Tensor<T> to_matrix(Tensor<T> t) {
    if (t.rank() == 2) return t;
    const std::size_t r = t.rows(), c = t.cols();
    return Tensor<T>({r, c}, std::move(t.storage()));
  }

  const Node& node(Var v) const {
    if (v.id >= nodes_.size()) throw ContractError("variable not on this tape");
    return nodes_[v.id];
  }

  Var push(Tensor<T> value, bool needs_grad) {
    nodes_.push_back(Node{std::move(value), Tensor<T>(), needs_grad, {}});
    return Var{nodes_.size() - 1};
  }

  template <typename Fn>
  Var record(Tensor<T> value, std::initializer_list<Var> inputs, Fn&& fn) {
    return record(std::move(value), std::vector<Var>(inputs), std::forward<Fn>(fn));
  }

  template <typename Fn>
  Var record(Tensor<T> value, const std::vector<Var>& inputs, Fn&& fn) {
    bool needs = false;
    for (Var in : inputs) needs = needs || node(in).needs_grad;
    Var v = push(std::move(value), needs);
    if (needs) nodes_[v.id].backprop = std::forward<Fn>(fn);
    return v;
  }

  bool wants(Var v) const { return nodes_[v.id].needs_grad; }

  Tensor<T>& grad_ref(Var v) { return grad_ref(v.id); }
  Tensor<T>& grad_ref(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  Var binary(Var a, Var b, const char* name, T ca, T cb) {
    const auto& A = value(a);
    const auto& B = value(b);
    const bool scalar_b = B.size() == 1 && A.size() != 1;
    if (!scalar_b && !A.same_shape(B)) {
      throw ShapeError(std::string(name) + ": " + shape_string(A.shape()) + " vs " +
                       shape_string(B.shape()));
    }
    Tensor<T> C(A.shape());
    for (std::size_t i = 0; i < A.size(); ++i) {
      C[i] = ca * A[i] + cb * (scalar_b ? B[0] : B[i]);
    }
    return record(std::move(C), {a, b}, [a, b, ca, cb, scalar_b](Tape& t, std::size_t self) {
      const auto& G = t.nodes_[self].grad;
      if (t.wants(a)) {
        auto& dA = t.grad_ref(a);
        for (std::size_t i = 0; i < G.size(); ++i) dA[i] += ca * G[i];
      }
      if (t.wants(b)) {
        auto& dB = t.grad_ref(b);
        for (std::size_t i = 0; i < G.size(); ++i) dB[scalar_b ? 0 : i] += cb * G[i];
      }
    });
  }

  std::vector<Node> nodes_;
};

}  // namespace tdnr

#endif  // TDNR_DIFFCORE_TAPE_HPP_
