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

// Click scoring and training objectives.
//
// Each function comes in two forms: a plain double-precision evaluation and
// a recorded form on a Tape. The recorded forms drive training; the plain
// forms serve reporting and act as references for the recorded ones.

#ifndef TDNR_OBJECTIVES_HPP_
#define TDNR_OBJECTIVES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tdnr/diffcore/tape.hpp"
#include "tdnr/errors.hpp"

namespace tdnr {

struct LossConfig {
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  double temperature = 0.1;
  double lambda1 = 0.1;
  std::size_t negative_ratio = 4;

  void validate() const {
    if (!(focal_alpha > 0.0 && focal_alpha <= 1.0)) throw ConfigError("focal_alpha must be in (0, 1]");
    if (!(focal_gamma >= 0.0)) throw ConfigError("focal_gamma must be >= 0");
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (!(lambda1 >= 0.0)) throw ConfigError("lambda1 must be >= 0");
    if (negative_ratio == 0) throw ConfigError("neg_ratio must be >= 1");
  }
};

inline constexpr double kProbabilityFloor = 1e-12;
inline constexpr double kUnitNormTolerance = 1e-4;

// ---- plain evaluation -------------------------------------------------------

inline double click_score(std::span<const double> user, std::span<const double> news) {
  if (user.size() != news.size()) {
    throw ShapeError("click_score: " + std::to_string(user.size()) + " vs " +
                     std::to_string(news.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < user.size(); ++i) acc += user[i] * news[i];
  return acc;
}

// exp(pos) / (exp(pos) + sum exp(neg)), shifted by the maximum score.
inline double positive_probability(double positive, std::span<const double> negatives) {
  if (negatives.empty()) throw ContractError("positive_probability needs at least one negative");
  double peak = positive;
  for (double n : negatives) peak = std::max(peak, n);
  const double top = std::exp(positive - peak);
  double total = top;
  for (double n : negatives) total += std::exp(n - peak);
  return top / total;
}

// -alpha (1 - p)^gamma log p, with p floored at 1e-12.
inline double focal_loss(double p, double alpha, double gamma) {
  if (std::isnan(p) || p > 1.0) throw ContractError("focal_loss: p must lie in (0, 1]");
  const double clamped = std::max(p, kProbabilityFloor);
  return -alpha * std::pow(1.0 - clamped, gamma) * std::log(clamped);
}

struct SampleScores {
  double positive = 0.0;
  std::vector<double> negatives;
};

// Mean focal loss over samples.
inline double recommendation_loss(std::span<const SampleScores> samples, const LossConfig& cfg) {
  if (samples.empty()) throw ContractError("recommendation_loss: empty batch");
  double total = 0.0;
  for (const auto& s : samples) {
    total += focal_loss(positive_probability(s.positive, s.negatives), cfg.focal_alpha,
                        cfg.focal_gamma);
  }
  return total / static_cast<double>(samples.size());
}

inline void require_unit_rows(const std::vector<std::vector<double>>& rows, const char* what) {
  for (const auto& r : rows) {
    double sq = 0.0;
    for (double v : r) sq += v * v;
    if (std::abs(std::sqrt(sq) - 1.0) > kUnitNormTolerance) {
      throw ContractError(std::string(what) + " vectors must be unit-norm");
    }
  }
}

// InfoNCE between title and abstract views; pair i is the positive for row i
// and every other abstract view in the pool is a negative.
inline double contrastive_loss(const std::vector<std::vector<double>>& titles,
                               const std::vector<std::vector<double>>& abstracts, double tau) {
  if (titles.empty() || titles.size() != abstracts.size()) {
    throw ShapeError("contrastive_loss: " + std::to_string(titles.size()) + " titles vs " +
                     std::to_string(abstracts.size()) + " abstracts");
  }
  if (!(tau > 0.0)) throw ContractError("contrastive_loss: temperature must be positive");
  require_unit_rows(titles, "title");
  require_unit_rows(abstracts, "abstract");
  const std::size_t n = titles.size();
  double total = 0.0;
  std::vector<double> logits(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) logits[j] = click_score(titles[i], abstracts[j]) / tau;
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - peak);
    total += -(logits[i] - peak - std::log(sum));
  }
  return total / static_cast<double>(n);
}

inline double total_loss(double rec, double cl, double lambda1) {
  if (!std::isfinite(rec) || !std::isfinite(cl)) throw NumericError("non-finite loss term");
  return rec + lambda1 * cl;
}

// ---- recorded forms ---------------------------------------------------------

// user (1 x d) against news (n x d): 1 x n scores.
template <typename T>
Var click_scores(Tape<T>& tape, Var user, Var news) {
  return tape.matmul_nt(user, news);
}

// `scores` is samples x (1 + K) with the clicked candidate in column 0.
// Returns the mean focal loss as a 1x1 scalar.
template <typename T>
Var recommendation_loss(Tape<T>& tape, Var scores, const LossConfig& cfg) {
  const std::size_t rows = tape.value(scores).rows();
  if (rows == 0) throw ContractError("recommendation_loss: empty batch");
  if (tape.value(scores).cols() < 2) throw ContractError("recommendation_loss needs negatives");
  const std::vector<std::size_t> positive_col(rows, 0);
  const Var log_p = tape.pick(tape.log_softmax(scores), positive_col);
  const Var miss = tape.affine(tape.exp(log_p), T(-1), T(1));
  const Var weight = tape.pow(miss, static_cast<T>(cfg.focal_gamma));
  const Var per_sample = tape.scale(tape.mul(weight, log_p), static_cast<T>(-cfg.focal_alpha));
  return tape.mean(per_sample);
}

// InfoNCE over unit rows of `titles` and `abstracts` (both n x d).
template <typename T>
Var contrastive_loss(Tape<T>& tape, Var titles, Var abstracts, double tau) {
  const auto& t = tape.value(titles);
  const auto& a = tape.value(abstracts);
  if (t.rows() == 0 || t.rows() != a.rows() || t.cols() != a.cols()) {
    throw ShapeError("contrastive_loss: " + shape_string(t.shape()) + " vs " +
                     shape_string(a.shape()));
  }
  for (const auto* m : {&t, &a}) {
    for (std::size_t i = 0; i < m->rows(); ++i) {
      double sq = 0.0;
      for (T v : m->row_span(i)) sq += static_cast<double>(v) * static_cast<double>(v);
      if (std::abs(std::sqrt(sq) - 1.0) > kUnitNormTolerance) {
        throw ContractError("contrastive_loss: inputs must be unit-norm");
      }
    }
  }
  const std::size_t n = t.rows();
  std::vector<std::size_t> diagonal(n);
  for (std::size_t i = 0; i < n; ++i) diagonal[i] = i;
  const Var logits = tape.scale(tape.matmul_nt(titles, abstracts), static_cast<T>(1.0 / tau));
  const Var matched = tape.pick(tape.log_softmax(logits), diagonal);
  return tape.scale(tape.mean(matched), T(-1));
}

template <typename T>
Var total_loss(Tape<T>& tape, Var rec, Var cl, double lambda1) {
  return tape.add(rec, tape.scale(cl, static_cast<T>(lambda1)));
}

}  // namespace tdnr

#endif  // TDNR_OBJECTIVES_HPP_
