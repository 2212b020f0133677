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

#ifndef TDNR_DATA_BATCH_HPP_
#define TDNR_DATA_BATCH_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "tdnr/data/behaviors.hpp"
#include "tdnr/data/news.hpp"
#include "tdnr/diffcore/tape.hpp"
#include "tdnr/random.hpp"

namespace tdnr {

// One positive with K sampled negatives, all as corpus indices.
struct TrainingSample {
  std::vector<std::size_t> history;
  std::size_t positive = 0;
  std::vector<std::size_t> negatives;
};

// One sample per clicked candidate. Negatives come from the same
// impression's unclicked candidates: without replacement when at least K
// exist, with replacement otherwise.
inline std::vector<TrainingSample> sample_training_instances(const ImpressionLog& imp,
                                                             const NewsCorpus& corpus,
                                                             std::size_t negative_ratio,
                                                             Rng& rng) {
  if (negative_ratio == 0) throw ContractError("negative ratio must be at least 1");
  std::vector<std::size_t> clicked, skipped;
  for (const auto& c : imp.candidates) {
    (c.label == 1 ? clicked : skipped).push_back(corpus.index_of(c.news_id));
  }
  std::vector<TrainingSample> out;
  if (clicked.empty() || skipped.empty()) return out;
  std::vector<std::size_t> history;
  history.reserve(imp.history.size());
  for (const auto& id : imp.history) history.push_back(corpus.index_of(id));

  for (std::size_t pos : clicked) {
    TrainingSample s;
    s.history = history;
    s.positive = pos;
    if (skipped.size() >= negative_ratio) {
      for (std::size_t k : rng.sample_without_replacement(skipped.size(), negative_ratio)) {
        s.negatives.push_back(skipped[k]);
      }
    } else {
      for (std::size_t k = 0; k < negative_ratio; ++k) {
        s.negatives.push_back(skipped[rng.below(skipped.size())]);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Token fields a model can consume. kAbstract is the raw abstract; kGenTitle
// the short abstract-side view.
enum class Field { kCats, kTitle, kGenTitle, kAbstract };

inline const TokenIds& field_tokens(const NewsArticle& art, Field field) {
  switch (field) {
    case Field::kCats: return art.cats_tokens;
    case Field::kTitle: return art.title_tokens;
    case Field::kGenTitle: return art.gen_title_tokens;
    case Field::kAbstract: return art.abstract_tokens;
  }
  return art.title_tokens;
}

// Padded token ids of one field for every pooled news, `width` per row.
struct FieldTokens {
  std::size_t width = 1;
  TokenIds ids;
  Mask mask;
};

inline FieldTokens pad_field(std::span<const std::size_t> news, const NewsCorpus& corpus,
                             Field field, std::int32_t pad_id = Vocabulary::kPad) {
  FieldTokens out;
  for (std::size_t n : news) out.width = std::max(out.width, field_tokens(corpus[n], field).size());
  out.ids.assign(news.size() * out.width, pad_id);
  out.mask.assign(news.size() * out.width, 0);
  for (std::size_t r = 0; r < news.size(); ++r) {
    const auto& toks = field_tokens(corpus[news[r]], field);
    for (std::size_t c = 0; c < toks.size(); ++c) {
      out.ids[r * out.width + c] = toks[c];
      out.mask[r * out.width + c] = 1;
    }
  }
  return out;
}

// Fixed-shape view of a list of samples. Every news that appears anywhere in
// the batch is stored once in `pool`; histories and candidates refer to pool
// positions.
struct Batch {
  std::vector<std::size_t> pool;  // corpus indices, first-seen order
  std::vector<Field> fields;
  std::vector<FieldTokens> tokens;  // parallel to `fields`, one row per pool entry

  std::size_t samples = 0;
  std::size_t history_width = 0;
  std::vector<std::size_t> history;  // samples x history_width
  Mask history_mask;
  std::size_t candidate_width = 0;
  std::vector<std::size_t> candidates;  // samples x candidate_width, column 0 positive

  // Per-sample deduplicated pool positions (history + candidates).
  std::vector<std::vector<std::size_t>> impression_pools;

  std::span<const std::size_t> history_row(std::size_t s) const {
    return std::span<const std::size_t>(history).subspan(s * history_width, history_width);
  }
  std::span<const std::uint8_t> history_mask_row(std::size_t s) const {
    return std::span<const std::uint8_t>(history_mask).subspan(s * history_width, history_width);
  }
  std::span<const std::size_t> candidate_row(std::size_t s) const {
    return std::span<const std::size_t>(candidates).subspan(s * candidate_width, candidate_width);
  }
  const FieldTokens& field(Field f) const {
    for (std::size_t i = 0; i < fields.size(); ++i)
      if (fields[i] == f) return tokens[i];
    throw ContractError("batch does not carry the requested field");
  }
};

inline Batch assemble_batch(std::span<const TrainingSample> samples, const NewsCorpus& corpus,
                            std::span<const Field> fields,
                            std::int32_t pad_id = Vocabulary::kPad) {
  if (samples.empty()) throw ContractError("assemble_batch: no samples");
  Batch b;
  b.samples = samples.size();
  b.fields.assign(fields.begin(), fields.end());
  std::unordered_map<std::size_t, std::size_t> position;
  auto intern = [&](std::size_t news) {
    auto [it, inserted] = position.emplace(news, b.pool.size());
    if (inserted) b.pool.push_back(news);
    return it->second;
  };

  b.candidate_width = 1 + samples[0].negatives.size();
  for (const auto& s : samples) {
    b.history_width = std::max(b.history_width, s.history.size());
    if (1 + s.negatives.size() != b.candidate_width) {
      throw ContractError("assemble_batch: samples disagree on negative count");
    }
  }
  b.history_width = std::max<std::size_t>(b.history_width, 1);
  b.history.assign(b.samples * b.history_width, 0);
  b.history_mask.assign(b.samples * b.history_width, 0);
  b.candidates.assign(b.samples * b.candidate_width, 0);
  b.impression_pools.resize(b.samples);

  for (std::size_t s = 0; s < samples.size(); ++s) {
    std::vector<std::size_t> local;
    auto note = [&local](std::size_t p) {
      if (std::find(local.begin(), local.end(), p) == local.end()) local.push_back(p);
    };
    for (std::size_t j = 0; j < samples[s].history.size(); ++j) {
      const std::size_t p = intern(samples[s].history[j]);
      b.history[s * b.history_width + j] = p;
      b.history_mask[s * b.history_width + j] = 1;
      note(p);
    }
    b.candidates[s * b.candidate_width] = intern(samples[s].positive);
    note(b.candidates[s * b.candidate_width]);
    for (std::size_t k = 0; k < samples[s].negatives.size(); ++k) {
      const std::size_t p = intern(samples[s].negatives[k]);
      b.candidates[s * b.candidate_width + 1 + k] = p;
      note(p);
    }
    b.impression_pools[s] = std::move(local);
  }
  for (Field f : fields) b.tokens.push_back(pad_field(b.pool, corpus, f, pad_id));
  return b;
}

}  // namespace tdnr

#endif  // TDNR_DATA_BATCH_HPP_
