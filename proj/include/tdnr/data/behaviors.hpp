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

// Behaviors table: impression_id  user_id  time  history  impressions
// History is space-separated news ids (oldest first); impressions are
// space-separated "<news_id>-<label>" pairs with label 0 or 1.

#ifndef TDNR_DATA_BEHAVIORS_HPP_
#define TDNR_DATA_BEHAVIORS_HPP_

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tdnr/data/news.hpp"
#include "tdnr/errors.hpp"

namespace tdnr {

inline constexpr std::size_t kDefaultMaxHistory = 25;

struct Candidate {
  std::string news_id;
  int label = 0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct ImpressionLog {
  std::string impression_id;
  std::string user_id;
  std::string time;
  std::vector<std::string> history;
  std::vector<Candidate> candidates;
  std::size_t source_line = 0;

  std::size_t positives() const {
    std::size_t n = 0;
    for (const auto& c : candidates) n += c.label == 1 ? 1 : 0;
    return n;
  }
  std::size_t negatives() const { return candidates.size() - positives(); }

  // Source line is bookkeeping, not content.
  friend bool operator==(const ImpressionLog& a, const ImpressionLog& b) {
    return a.impression_id == b.impression_id && a.user_id == b.user_id && a.time == b.time &&
           a.history == b.history && a.candidates == b.candidates;
  }
};

inline std::vector<std::string> split_spaces(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < text.size() && text[i] != ' ') ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

// Keeps the most recent `max_history` clicks (the tail of the list).
inline std::vector<ImpressionLog> parse_behaviors(std::istream& in,
                                                  std::size_t max_history = kDefaultMaxHistory) {
  std::vector<ImpressionLog> logs;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() < 5) {
      throw ParseError(line_no, "behaviors row has " + std::to_string(cols.size()) +
                                    " columns, need 5");
    }
    ImpressionLog log;
    log.impression_id = std::string(cols[0]);
    log.user_id = std::string(cols[1]);
    log.time = std::string(cols[2]);
    log.source_line = line_no;
    log.history = split_spaces(cols[3]);
    if (log.history.size() > max_history) {
      log.history.erase(log.history.begin(),
                        log.history.end() - static_cast<std::ptrdiff_t>(max_history));
    }
    for (const auto& item : split_spaces(cols[4])) {
      const std::size_t dash = item.rfind('-');
      if (dash == std::string::npos || dash == 0 || dash + 2 != item.size() ||
          (item[dash + 1] != '0' && item[dash + 1] != '1')) {
        throw ParseError(line_no, "candidate '" + item + "' lacks a -0/-1 label");
      }
      log.candidates.push_back({item.substr(0, dash), item[dash + 1] - '0'});
    }
    logs.push_back(std::move(log));
  }
  return logs;
}

inline void write_behaviors(std::ostream& out, const std::vector<ImpressionLog>& logs) {
  for (const auto& log : logs) {
    out << log.impression_id << '\t' << log.user_id << '\t' << log.time << '\t';
    for (std::size_t i = 0; i < log.history.size(); ++i) out << (i ? " " : "") << log.history[i];
    out << '\t';
    for (std::size_t i = 0; i < log.candidates.size(); ++i) {
      out << (i ? " " : "") << log.candidates[i].news_id << '-' << log.candidates[i].label;
    }
    out << '\n';
  }
}

// Every history and candidate id must resolve against the corpus.
inline void validate_impressions(const std::vector<ImpressionLog>& logs,
                                 const NewsCorpus& corpus) {
  for (const auto& log : logs) {
    for (const auto& id : log.history) {
      if (!corpus.find(id)) {
        throw ParseError(log.source_line, "history references unknown news '" + id + "'");
      }
    }
    for (const auto& c : log.candidates) {
      if (!corpus.find(c.news_id)) {
        throw ParseError(log.source_line,
                         "candidate references unknown news '" + c.news_id + "'");
      }
    }
  }
}

// Deterministic tail split: the last ceil(fraction * n) impressions are held
// out, mirroring time-ordered logs.
struct ImpressionSplit {
  std::vector<ImpressionLog> train;
  std::vector<ImpressionLog> heldout;
};

inline ImpressionSplit split_holdout(const std::vector<ImpressionLog>& logs, double fraction) {
  if (fraction < 0.0 || fraction >= 1.0) {
    throw ConfigError("holdout fraction must be in [0, 1)");
  }
  const auto n = logs.size();
  auto held = static_cast<std::size_t>(static_cast<double>(n) * fraction + 0.999999);
  if (held > n) held = n;
  ImpressionSplit split;
  split.train.assign(logs.begin(), logs.end() - static_cast<std::ptrdiff_t>(held));
  split.heldout.assign(logs.end() - static_cast<std::ptrdiff_t>(held), logs.end());
  return split;
}

}  // namespace tdnr

#endif  // TDNR_DATA_BEHAVIORS_HPP_
