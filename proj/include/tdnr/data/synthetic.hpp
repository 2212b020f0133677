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

// Synthetic clickbait corpora in the news/behaviors table formats.
//
// Every article has a latent topic. Its abstract is drawn from that topic's
// words (mixed with topic-neutral filler). With probability `clickbait_rate`
// the title is instead written with the words of a different, popular topic;
// otherwise it matches the abstract. Each user prefers one topic and clicks
// exactly the candidates whose abstract topic is the preferred one, so a
// clickbait title advertises a topic the article does not deliver.

#ifndef TDNR_DATA_SYNTHETIC_HPP_
#define TDNR_DATA_SYNTHETIC_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "tdnr/data/news.hpp"
#include "tdnr/errors.hpp"
#include "tdnr/random.hpp"

namespace tdnr {

struct SyntheticConfig {
  std::size_t n_users = 50;
  std::size_t n_news = 200;
  std::size_t n_topics = 4;
  double clickbait_rate = 0.0;
  std::uint64_t seed = 1;

  std::size_t impressions_per_user = 4;
  std::size_t candidates_per_impression = 10;
  std::size_t history_min = 5;
  std::size_t history_max = 15;
  std::size_t words_per_topic = 20;
  std::size_t filler_words = 40;
  std::size_t title_length = 8;
  std::size_t abstract_length = 40;
  // Fraction of title/abstract tokens drawn from the topic rather than filler.
  double topic_word_share = 0.6;
  std::size_t n_categories = 3;
  // Topic popularity is proportional to 1 / (rank + 1)^skew.
  double popularity_skew = 1.0;
  // Article-specific tokens (named entities) opening both title and abstract.
  std::size_t entity_words = 0;
  // When positive, a ninth column carries an extractive summary: the first
  // `summary_length` topic words of the abstract.
  std::size_t summary_length = 0;

  void validate() const {
    if (n_users == 0 || n_news == 0 || n_topics == 0) {
      throw ContractError("synthetic corpus needs positive user, news and topic counts");
    }
    if (!(clickbait_rate >= 0.0 && clickbait_rate <= 1.0)) {
      throw ContractError("clickbait_rate must lie in [0, 1]");
    }
    if (clickbait_rate > 0.0 && n_topics < 2) {
      throw ContractError("clickbait needs at least two topics");
    }
    if (candidates_per_impression < 2 || impressions_per_user == 0) {
      throw ContractError("impressions need at least two candidates");
    }
    if (history_min > history_max || words_per_topic == 0 || title_length == 0 ||
        abstract_length == 0 || n_categories == 0) {
      throw ContractError("invalid synthetic text shape");
    }
    if (!(topic_word_share > 0.0 && topic_word_share <= 1.0)) {
      throw ContractError("topic_word_share must lie in (0, 1]");
    }
  }
};

struct SyntheticCorpus {
  std::string news_tsv;
  std::string behaviors_tsv;
  std::string provenance;  // key=value lines
  std::vector<std::string> clickbait_ids;
  std::vector<std::size_t> news_topic;
  std::vector<std::size_t> title_topic;
  std::vector<std::size_t> user_topic;
};

namespace synthetic_detail {

inline std::string topic_word(std::size_t topic, std::size_t k) {
  return "t" + std::to_string(topic) + "w" + std::to_string(k);
}

inline std::size_t draw_weighted(Rng& rng, const std::vector<double>& weights) {
  double total = 0;
  for (double w : weights) total += w;
  double x = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (x < weights[i]) return i;
    x -= weights[i];
  }
  return weights.size() - 1;
}

inline std::string entity_prefix(std::size_t news, std::size_t count) {
  std::string out;
  for (std::size_t k = 0; k < count; ++k) {
    out += "e" + std::to_string(news + 1) + "x" + std::to_string(k) + ' ';
  }
  return out;
}

inline std::string summary_of(const std::string& abstract, std::size_t length) {
  std::string out;
  std::size_t kept = 0;
  for (const auto& word : split_words(abstract)) {
    if (kept == length) break;
    if (word.front() != 't') continue;
    out += (kept++ ? " " : "") + word;
  }
  return out;
}

inline std::string text_for(Rng& rng, std::size_t topic, std::size_t length,
                            const SyntheticConfig& cfg, std::string prefix = {}) {
  std::string out = std::move(prefix);
  for (std::size_t i = 0; i < length; ++i) {
    if (i) out += ' ';
    if (cfg.filler_words == 0 || rng.bernoulli(cfg.topic_word_share)) {
      out += topic_word(topic, rng.below(cfg.words_per_topic));
    } else {
      out += "f" + std::to_string(rng.below(cfg.filler_words));
    }
  }
  return out;
}

}  // namespace synthetic_detail

inline SyntheticCorpus generate_synthetic_corpus(const SyntheticConfig& cfg) {
  using namespace synthetic_detail;
  cfg.validate();
  Rng rng(cfg.seed);
  SyntheticCorpus out;

  std::vector<double> popularity(cfg.n_topics);
  for (std::size_t t = 0; t < cfg.n_topics; ++t) {
    popularity[t] = 1.0 / std::pow(static_cast<double>(t + 1), cfg.popularity_skew);
  }

  std::ostringstream news;
  std::vector<std::vector<std::size_t>> by_topic(cfg.n_topics);
  for (std::size_t i = 0; i < cfg.n_news; ++i) {
    const std::string id = "N" + std::to_string(i + 1);
    const std::size_t topic = rng.below(cfg.n_topics);
    std::size_t title_topic = topic;
    if (rng.bernoulli(cfg.clickbait_rate)) {
      std::vector<double> others = popularity;
      others[topic] = 0.0;
      title_topic = draw_weighted(rng, others);
      out.clickbait_ids.push_back(id);
    }
    const std::size_t category = rng.below(cfg.n_categories);
    const std::size_t subcategory = rng.below(cfg.n_categories);
    const std::string entities = entity_prefix(i, cfg.entity_words);
    const std::string title = text_for(rng, title_topic, cfg.title_length, cfg, entities);
    const std::string abstract = text_for(rng, topic, cfg.abstract_length, cfg, entities);
    news << id << "\tsection" << category << "\tdesk" << subcategory << '\t' << title << '\t'
         << abstract << "\thttps://example.invalid/" << id << "\t[]\t[]";
    if (cfg.summary_length > 0) {
      news << '\t' << entities << summary_of(abstract, cfg.summary_length);
    }
    news << '\n';
    out.news_topic.push_back(topic);
    out.title_topic.push_back(title_topic);
    by_topic[topic].push_back(i);
  }

  // Users only prefer topics that have at least one article.
  std::vector<double> user_weights = popularity;
  for (std::size_t t = 0; t < cfg.n_topics; ++t) {
    if (by_topic[t].empty()) user_weights[t] = 0.0;
  }
  std::vector<std::vector<std::size_t>> histories(cfg.n_users);
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    const std::size_t topic = draw_weighted(rng, user_weights);
    out.user_topic.push_back(topic);
    const auto& liked = by_topic[topic];
    const std::size_t span = cfg.history_max - cfg.history_min + 1;
    const std::size_t want = std::min(cfg.history_min + rng.below(span), liked.size());
    for (std::size_t k : rng.sample_without_replacement(liked.size(), want)) {
      histories[u].push_back(liked[k]);
    }
  }

  auto news_id = [](std::size_t i) { return "N" + std::to_string(i + 1); };
  std::ostringstream behaviors;
  std::size_t impression = 0;
  const std::size_t per = std::min(cfg.candidates_per_impression, cfg.n_news);
  for (std::size_t round = 0; round < cfg.impressions_per_user; ++round) {
    for (std::size_t u = 0; u < cfg.n_users; ++u) {
      const std::size_t topic = out.user_topic[u];
      std::vector<std::size_t> cands;
      for (std::size_t k : rng.sample_without_replacement(cfg.n_news, per)) cands.push_back(k);
      auto clicked = [&](std::size_t n) { return out.news_topic[n] == topic; };
      const bool has_pos = std::any_of(cands.begin(), cands.end(), clicked);
      const bool has_neg = !std::all_of(cands.begin(), cands.end(), clicked);
      auto absent = [&cands](std::size_t n) {
        return std::find(cands.begin(), cands.end(), n) == cands.end();
      };
      if (!has_pos) {
        // No liked article can already be present, so any pick is new.
        const auto& liked = by_topic[topic];
        cands[rng.below(cands.size())] = liked[rng.below(liked.size())];
      } else if (!has_neg && by_topic[topic].size() < cfg.n_news) {
        std::size_t other;
        do {
          other = rng.below(cfg.n_news);
        } while (clicked(other) || !absent(other));
        cands[rng.below(cands.size())] = other;
      }
      ++impression;
      behaviors << impression << "\tU" << (u + 1) << "\t11/" << (15 + round % 14) << "/2019 "
                << (1 + u % 12) << ':' << std::setw(2) << std::setfill('0') << (u % 60)
                << ":00 AM\t";
      for (std::size_t j = 0; j < histories[u].size(); ++j) {
        if (j) behaviors << ' ';
        behaviors << news_id(histories[u][j]);
      }
      behaviors << '\t';
      for (std::size_t j = 0; j < cands.size(); ++j) {
        if (j) behaviors << ' ';
        behaviors << news_id(cands[j]) << '-' << (clicked(cands[j]) ? 1 : 0);
      }
      behaviors << '\n';
    }
  }

  out.news_tsv = news.str();
  out.behaviors_tsv = behaviors.str();

  std::ostringstream meta;
  meta << "generator=tdnr-synth\n"
       << "seed=" << cfg.seed << '\n'
       << "n_users=" << cfg.n_users << '\n'
       << "n_news=" << cfg.n_news << '\n'
       << "n_topics=" << cfg.n_topics << '\n'
       << "clickbait_rate=" << cfg.clickbait_rate << '\n'
       << "impressions_per_user=" << cfg.impressions_per_user << '\n'
       << "candidates_per_impression=" << cfg.candidates_per_impression << '\n'
       << "history_min=" << cfg.history_min << '\n'
       << "history_max=" << cfg.history_max << '\n'
       << "words_per_topic=" << cfg.words_per_topic << '\n'
       << "filler_words=" << cfg.filler_words << '\n'
       << "title_length=" << cfg.title_length << '\n'
       << "abstract_length=" << cfg.abstract_length << '\n'
       << "topic_word_share=" << cfg.topic_word_share << '\n'
       << "n_categories=" << cfg.n_categories << '\n'
       << "popularity_skew=" << cfg.popularity_skew << '\n'
       << "entity_words=" << cfg.entity_words << '\n'
       << "summary_length=" << cfg.summary_length << '\n'
       << "clickbait_count=" << out.clickbait_ids.size() << '\n'
       << "clickbait_ids=";
  for (std::size_t i = 0; i < out.clickbait_ids.size(); ++i) {
    if (i) meta << ',';
    meta << out.clickbait_ids[i];
  }
  meta << '\n';
  out.provenance = meta.str();
  return out;
}

}  // namespace tdnr

#endif  // TDNR_DATA_SYNTHETIC_HPP_
