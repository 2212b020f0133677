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

// News table parsing and vocabulary-based tokenization.
//
// News table layout (tab-separated, one article per line):
//   news_id  category  subcategory  title  abstract  url  title_entities
//   abstract_entities  [generated_title]
// Columns 6-8 are ignored. The ninth column is read only when
// `NewsTableOptions::generated_title_column` is set.

#ifndef TDNR_DATA_NEWS_HPP_
#define TDNR_DATA_NEWS_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tdnr/errors.hpp"

namespace tdnr {

using TokenIds = std::vector<std::int32_t>;

// Splits a tab-separated line, keeping empty fields.
inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

// Lowercased alphanumeric runs. Bytes >= 0x80 count as word characters so
// UTF-8 words are not split apart.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto byte = static_cast<unsigned char>(ch);
    const bool word_char = (byte >= '0' && byte <= '9') || (byte >= 'a' && byte <= 'z') ||
                           (byte >= 'A' && byte <= 'Z') || byte >= 0x80;
    if (word_char) {
      current.push_back(byte >= 'A' && byte <= 'Z' ? static_cast<char>(byte - 'A' + 'a') : ch);
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

// Category prompt: "<category> about <subcategory>".
inline std::string build_prompt(std::string_view category, std::string_view subcategory) {
  if (category.empty()) throw ContractError("build_prompt: empty category");
  if (subcategory.empty()) return std::string(category);
  std::string out(category);
  out += " about ";
  out += subcategory;
  return out;
}

class Vocabulary {
 public:
  static constexpr std::int32_t kPad = 0;
  static constexpr std::int32_t kUnknown = 1;

  Vocabulary() : tokens_{"<pad>", "<unk>"} {}

  // Ids are assigned from 2 upwards in the given order.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary vocab;
    for (const auto& tok : tokens) {
      if (tok.empty() || vocab.index_.count(tok)) {
        throw ContractError("vocabulary token '" + tok + "' empty or repeated");
      }
      vocab.index_.emplace(tok, static_cast<std::int32_t>(vocab.tokens_.size()));
      vocab.tokens_.push_back(tok);
    }
    return vocab;
  }

  std::int32_t lookup(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnknown : it->second;
  }

  const std::string& token(std::int32_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw ContractError("token id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
  }

  // Including the two reserved ids.
  std::size_t size() const noexcept { return tokens_.size(); }

  // Non-reserved tokens in id order.
  std::vector<std::string> learned_tokens() const {
    return std::vector<std::string>(tokens_.begin() + 2, tokens_.end());
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

inline TokenIds tokenize(std::string_view text, std::size_t max_len, const Vocabulary& vocab) {
  TokenIds ids;
  for (const auto& word : split_words(text)) {
    if (ids.size() >= max_len) break;
    ids.push_back(vocab.lookup(word));
  }
  return ids;
}

struct NewsRecord {
  std::string news_id;
  std::string category;
  std::string subcategory;
  std::string title;
  std::string abstract;
  std::string generated_title;  // empty when not supplied

  friend bool operator==(const NewsRecord&, const NewsRecord&) = default;
};

struct NewsTableOptions {
  bool generated_title_column = false;
};

inline std::vector<NewsRecord> parse_news_table(std::istream& in,
                                                const NewsTableOptions& options = {}) {
  std::vector<NewsRecord> records;
  std::unordered_set<std::string> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = strip_cr(raw);
    if (line.empty()) continue;
    const auto cols = split_tabs(line);
    if (cols.size() < 5) {
      throw ParseError(line_no, "news row has " + std::to_string(cols.size()) +
                                    " columns, need at least 5");
    }
    NewsRecord rec;
    rec.news_id = std::string(cols[0]);
    if (rec.news_id.empty()) throw ParseError(line_no, "empty news id");
    rec.category = std::string(cols[1]);
    rec.subcategory = std::string(cols[2]);
    rec.title = std::string(cols[3]);
    rec.abstract = std::string(cols[4]);
    if (options.generated_title_column && cols.size() >= 9) {
      rec.generated_title = std::string(cols[8]);
    }
    if (!seen.insert(rec.news_id).second) throw DuplicateIdError(rec.news_id);
    records.push_back(std::move(rec));
  }
  return records;
}

// Inverse of parse_news_table. URL and entity columns are written empty.
inline void write_news_table(std::ostream& out, const std::vector<NewsRecord>& records,
                             const NewsTableOptions& options = {}) {
  for (const auto& r : records) {
    out << r.news_id << '\t' << r.category << '\t' << r.subcategory << '\t' << r.title << '\t'
        << r.abstract << "\t\t[]\t[]";
    if (options.generated_title_column) out << '\t' << r.generated_title;
    out << '\n';
  }
}

// Ids by (frequency desc, token asc) over title, abstract, generated title
// and category-prompt words. `max_size` of 0 means unbounded; otherwise it
// caps the total size including the reserved ids.
inline Vocabulary build_vocabulary(const std::vector<NewsRecord>& news, std::size_t min_freq,
                                   std::size_t max_size = 0) {
  if (news.empty()) throw ContractError("build_vocabulary: empty news table");
  if (min_freq == 0) throw ContractError("build_vocabulary: min_freq must be positive");
  std::map<std::string, std::size_t> counts;
  auto count_text = [&counts](std::string_view text) {
    for (auto& w : split_words(text)) ++counts[std::move(w)];
  };
  for (const auto& rec : news) {
    count_text(rec.title);
    count_text(rec.abstract);
    count_text(rec.generated_title);
    if (!rec.category.empty()) count_text(build_prompt(rec.category, rec.subcategory));
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_freq) ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (max_size > 2 && ranked.size() > max_size - 2) ranked.resize(max_size - 2);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, n] : ranked) tokens.push_back(tok);
  return Vocabulary::from_tokens(tokens);
}

struct FieldLengths {
  std::size_t title = 20;
  std::size_t generated_title = 25;
  std::size_t abstract = 50;
};

struct NewsArticle {
  std::string news_id;
  std::string category;
  std::string subcategory;
  TokenIds cats_tokens;
  TokenIds title_tokens;
  TokenIds abstract_tokens;
  TokenIds gen_title_tokens;
};

inline NewsArticle tokenize_news(const NewsRecord& rec, const Vocabulary& vocab,
                                 const FieldLengths& lengths) {
  NewsArticle art;
  art.news_id = rec.news_id;
  art.category = rec.category;
  art.subcategory = rec.subcategory;
  if (!rec.category.empty()) {
    art.cats_tokens = tokenize(build_prompt(rec.category, rec.subcategory),
                               std::numeric_limits<std::size_t>::max(), vocab);
  }
  art.title_tokens = tokenize(rec.title, lengths.title, vocab);
  art.abstract_tokens = rec.abstract.empty() ? art.title_tokens
                                             : tokenize(rec.abstract, lengths.abstract, vocab);
  if (!rec.generated_title.empty()) {
    art.gen_title_tokens = tokenize(rec.generated_title, lengths.generated_title, vocab);
  }
  if (art.gen_title_tokens.empty()) {
    const std::size_t n = std::min(lengths.generated_title, art.abstract_tokens.size());
    art.gen_title_tokens.assign(art.abstract_tokens.begin(), art.abstract_tokens.begin() + n);
  }
  return art;
}

// Tokenized articles with id lookup.
class NewsCorpus {
 public:
  NewsCorpus() = default;

  static NewsCorpus build(const std::vector<NewsRecord>& records, const Vocabulary& vocab,
                          const FieldLengths& lengths) {
    NewsCorpus corpus;
    for (const auto& rec : records) corpus.add(tokenize_news(rec, vocab, lengths));
    return corpus;
  }

  void add(NewsArticle article) {
    if (article.news_id.empty()) throw ContractError("news article without id");
    if (!index_.emplace(article.news_id, articles_.size()).second) {
      throw DuplicateIdError(article.news_id);
    }
    articles_.push_back(std::move(article));
  }

  std::optional<std::size_t> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(const std::string& id) const {
    auto found = find(id);
    if (!found) throw ContractError("unknown news id '" + id + "'");
    return *found;
  }

  const NewsArticle& operator[](std::size_t i) const { return articles_[i]; }
  const std::vector<NewsArticle>& articles() const noexcept { return articles_; }
  std::size_t size() const noexcept { return articles_.size(); }

 private:
  std::vector<NewsArticle> articles_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace tdnr

#endif  // TDNR_DATA_NEWS_HPP_
