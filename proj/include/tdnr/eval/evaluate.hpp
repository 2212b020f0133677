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

// Evaluation of trained models, including ablations and per-impression rank inspection.

#ifndef TDNR_EVAL_EVALUATE_HPP_
#define TDNR_EVAL_EVALUATE_HPP_

#include <algorithm>
#include <cstddef>
#include <exception>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tdnr/data/behaviors.hpp"
#include "tdnr/data/news.hpp"
#include "tdnr/diffcore/tape.hpp"
#include "tdnr/encoders.hpp"
#include "tdnr/errors.hpp"
#include "tdnr/eval/metrics.hpp"
#include "tdnr/objectives.hpp"
#include "tdnr/training/config.hpp"
#include "tdnr/training/trainer.hpp"

namespace tdnr {

// Click scores for every candidate of one impression, in candidate order.
template <typename T>
std::vector<double> score_impression(ModelParams<T>& params, const NewsCorpus& corpus,
                                     const ImpressionLog& imp) {
  Tape<T> tape;
  std::vector<std::size_t> history, candidates;
  for (const auto& id : imp.history) history.push_back(corpus.index_of(id));
  for (const auto& c : imp.candidates) candidates.push_back(corpus.index_of(c.news_id));
  const Var user = encode_user(tape, std::span<const std::size_t>(history), corpus, params).pooled;
  std::vector<double> out;
  if (candidates.empty()) return out;
  const auto fields = embed_fields(tape, std::span<const std::size_t>(candidates), corpus, params);
  const Var news = merge_fields(tape, std::span<const Var>(fields), params.candidate_merge).pooled;
  const auto& scores = tape.value(click_scores(tape, user, news));
  for (T s : scores.storage()) out.push_back(static_cast<double>(s));
  return out;
}

// Scores all impressions. Work is split across threads by impression; each
// impression's scores depend only on the parameters, so the result does not
// depend on the thread count.
template <typename T>
std::vector<std::vector<double>> score_impressions(ModelParams<T>& params, const NewsCorpus& corpus,
                                                   const std::vector<ImpressionLog>& impressions,
                                                   std::size_t threads = 0) {
  std::vector<std::vector<double>> out(impressions.size());
  if (threads == 0) threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
  threads = std::min(threads, std::max<std::size_t>(impressions.size(), 1));
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = w; i < impressions.size(); i += threads) {
        out[i] = score_impression(params, corpus, impressions[i]);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

struct ImpressionMetrics {
  std::string impression_id;
  double auc = 0.0;
  double mrr = 0.0;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
  std::vector<std::string> ranked_ids;
};

struct MetricsReport {
  std::string variant;
  double auc = 0.0;
  double mrr = 0.0;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
  std::size_t n_impressions = 0;
  std::size_t n_skipped = 0;
  std::vector<ImpressionMetrics> rows;
};

inline std::vector<int> impression_labels(const ImpressionLog& imp) {
  std::vector<int> labels;
  for (const auto& c : imp.candidates) labels.push_back(c.label);
  return labels;
}

// Averages metrics over impressions that have both clicked and unclicked
// candidates; the rest are counted in n_skipped.
inline MetricsReport summarize(const std::vector<ImpressionLog>& impressions,
                               const std::vector<std::vector<double>>& scores,
                               const std::string& variant) {
  if (scores.size() != impressions.size()) throw ShapeError("summarize: score/impression count mismatch");
  MetricsReport report;
  report.variant = variant;
  for (std::size_t i = 0; i < impressions.size(); ++i) {
    const auto labels = impression_labels(impressions[i]);
    const auto a = auc(scores[i], labels);
    if (!a) {
      ++report.n_skipped;
      continue;
    }
    ImpressionMetrics row;
    row.impression_id = impressions[i].impression_id;
    row.auc = *a;
    row.mrr = *mrr(scores[i], labels);
    row.ndcg5 = *ndcg_at_k(scores[i], labels, 5);
    row.ndcg10 = *ndcg_at_k(scores[i], labels, 10);
    for (std::size_t k : ranking_order(scores[i])) {
      row.ranked_ids.push_back(impressions[i].candidates[k].news_id);
    }
    report.auc += row.auc;
    report.mrr += row.mrr;
    report.ndcg5 += row.ndcg5;
    report.ndcg10 += row.ndcg10;
    report.rows.push_back(std::move(row));
  }
  report.n_impressions = report.rows.size();
  if (report.n_impressions == 0) throw ContractError("evaluate: no scoreable impression");
  const double n = static_cast<double>(report.n_impressions);
  report.auc /= n;
  report.mrr /= n;
  report.ndcg5 /= n;
  report.ndcg10 /= n;
  return report;
}

// The variant is the one `params` was built for.
template <typename T>
MetricsReport evaluate(ModelParams<T>& params, const NewsCorpus& corpus,
                       const std::vector<ImpressionLog>& impressions) {
  const auto scores = score_impressions(params, corpus, impressions);
  return summarize(impressions, scores, variant_name(params.variant));
}

inline void write_report_header(std::ostream& out) {
  out << "variant,auc,mrr,ndcg5,ndcg10,n_impressions\n";
}

inline void write_report_row(std::ostream& out, const MetricsReport& r) {
  out << r.variant << ',' << format_double(r.auc) << ',' << format_double(r.mrr) << ','
      << format_double(r.ndcg5) << ',' << format_double(r.ndcg10) << ',' << r.n_impressions << '\n';
}

inline void write_report_detail(std::ostream& out, const MetricsReport& r) {
  out << "impression_id,auc,mrr,ndcg5,ndcg10,ranked_news_ids\n";
  for (const auto& row : r.rows) {
    out << row.impression_id << ',' << format_double(row.auc) << ',' << format_double(row.mrr)
        << ',' << format_double(row.ndcg5) << ',' << format_double(row.ndcg10) << ',';
    for (std::size_t i = 0; i < row.ranked_ids.size(); ++i) {
      if (i) out << ' ';
      out << row.ranked_ids[i];
    }
    out << '\n';
  }
}

template <typename T = float>
struct AblationResult {
  MetricsReport report;
  TrainResult<T> training;
};

// Trains `variant` on the leading part of the impressions and evaluates on
// the held-out tail.
template <typename T = float>
AblationResult<T> run_ablation(Variant variant, TrainConfig cfg, const Dataset& data) {
  cfg.variant = variant;
  cfg.validate();
  const ImpressionSplit split = split_holdout(data.impressions, cfg.holdout);
  if (split.heldout.empty()) throw ConfigError("holdout leaves no impressions to evaluate");
  AblationResult<T> out;
  out.training = train<T>(cfg, data.corpus, data.vocab.size(), split.train);
  out.report = evaluate(out.training.state.params, data.corpus, split.heldout);
  return out;
}

inline AblationResult<float> run_ablation(const std::string& variant, const TrainConfig& cfg,
                                          const Dataset& data) {
  return run_ablation<float>(parse_variant(variant), cfg, data);
}

// ---- rank inspection --------------------------------------------------------

struct RankRow {
  std::size_t rank = 0;  // 0 marks a warning row
  std::string news_id;
  std::optional<double> score;
  std::string flag;  // clicked, clickbait, none, or warning:...
};

inline constexpr const char* kFlagClicked = "clicked";
inline constexpr const char* kFlagClickbait = "clickbait";
inline constexpr const char* kFlagNone = "none";

inline std::string parse_flag_value(const std::string& v) {
  if (v == kFlagClicked || v == kFlagClickbait) return v;
  throw ConfigError("flag must be clicked or clickbait, got '" + v + "'");
}

// Candidates by descending score, ties by news id. Flagged ids that are not
// candidates of the impression become trailing warning rows.
template <typename T>
std::vector<RankRow> inspect_ranking(ModelParams<T>& params, const NewsCorpus& corpus,
                                     const ImpressionLog& imp,
                                     const std::map<std::string, std::string>& flags) {
  const auto scores = score_impression(params, corpus, imp);
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return imp.candidates[a].news_id < imp.candidates[b].news_id;
  });
  std::vector<RankRow> rows;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& id = imp.candidates[order[r]].news_id;
    const auto it = flags.find(id);
    rows.push_back({r + 1, id, scores[order[r]], it == flags.end() ? kFlagNone : it->second});
  }
  for (const auto& [id, flag] : flags) {
    const bool present = std::any_of(imp.candidates.begin(), imp.candidates.end(),
                                     [&id](const Candidate& c) { return c.news_id == id; });
    if (!present) rows.push_back({0, id, std::nullopt, "warning:not_a_candidate:" + flag});
  }
  return rows;
}

inline void write_ranking(std::ostream& out, const std::vector<RankRow>& rows) {
  out << "rank,news_id,score,flag\n";
  for (const auto& r : rows) {
    out << r.rank << ',' << r.news_id << ',' << (r.score ? format_double(*r.score) : "") << ','
        << r.flag << '\n';
  }
}

// Mean rank of rows carrying `flag`; nullopt when none do.
inline std::optional<double> mean_flagged_rank(const std::vector<RankRow>& rows, const std::string& flag) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.rank > 0 && r.flag == flag) {
      total += static_cast<double>(r.rank);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return total / static_cast<double>(n);
}

}  // namespace tdnr

#endif  // TDNR_EVAL_EVALUATE_HPP_
