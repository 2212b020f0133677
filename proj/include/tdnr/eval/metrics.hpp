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

// Impression-level ranking metrics. Each returns nullopt for an impression
// it cannot score (missing positives, or for AUC missing negatives); such
// impressions are excluded from averages.

#ifndef TDNR_EVAL_METRICS_HPP_
#define TDNR_EVAL_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdnr/errors.hpp"

namespace tdnr {

namespace metrics_detail {

inline void check_sizes(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("metric: " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(labels.size()) + " labels");
  }
}

inline std::size_t count_positives(std::span<const int> labels) {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l > 0; }));
}

}  // namespace metrics_detail

// Candidate positions by descending score; equal scores keep index order.
inline std::vector<std::size_t> ranking_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

// Fraction of (positive, negative) pairs ordered correctly, ties 0.5.
// Sweeps tie groups in ascending score order.
inline std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
  metrics_detail::check_sizes(scores, labels);
  const std::size_t pos = metrics_detail::count_positives(labels);
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double wins = 0.0;  // doubled to keep ties integral
  std::size_t negatives_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::size_t group_pos = 0, group_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] > 0 ? group_pos : group_neg) += 1;
      ++j;
    }
    wins += static_cast<double>(group_pos) *
            (2.0 * static_cast<double>(negatives_below) + static_cast<double>(group_neg));
    negatives_below += group_neg;
    i = j;
  }
  return wins / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

// Mean of 1/rank over all positives.
inline std::optional<double> mrr(std::span<const double> scores, std::span<const int> labels) {
  metrics_detail::check_sizes(scores, labels);
  const std::size_t pos = metrics_detail::count_positives(labels);
  if (pos == 0) return std::nullopt;
  const auto order = ranking_order(scores);
  double total = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (labels[order[r]] > 0) total += 1.0 / static_cast<double>(r + 1);
  }
  return total / static_cast<double>(pos);
}

inline std::optional<double> ndcg_at_k(std::span<const double> scores, std::span<const int> labels,
                                       std::size_t k) {
  metrics_detail::check_sizes(scores, labels);
  if (k == 0) throw ContractError("ndcg_at_k: k must be positive");
  const std::size_t pos = metrics_detail::count_positives(labels);
  if (pos == 0) return std::nullopt;
  const auto order = ranking_order(scores);
  double dcg = 0.0, ideal = 0.0;
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r) {
    const double discount = 1.0 / std::log2(static_cast<double>(r + 2));
    if (labels[order[r]] > 0) dcg += discount;
    if (r < pos) ideal += discount;
  }
  return dcg / ideal;
}

}  // namespace tdnr

#endif  // TDNR_EVAL_METRICS_HPP_
