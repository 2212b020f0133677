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

// Small hand-built worlds for model-level tests.

#ifndef TDNR_TESTS_SUPPORT_FIXTURES_HPP_
#define TDNR_TESTS_SUPPORT_FIXTURES_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "tdnr/data/batch.hpp"
#include "tdnr/data/news.hpp"
#include "tdnr/encoders.hpp"
#include "tdnr/random.hpp"
#include "tdnr/training/config.hpp"

namespace tdnr::testing {

struct TinyWorld {
  std::vector<NewsRecord> records;
  Vocabulary vocab;
  NewsCorpus corpus;
};

inline std::string random_words(Rng& rng, std::size_t count, std::size_t vocab) {
  std::string out;
  for (std::size_t i = 0; i < count; ++i) {
    if (i) out += ' ';
    out += "w" + std::to_string(rng.below(vocab));
  }
  return out;
}

// `n_news` articles with 2-6 word titles and 3-8 word abstracts over a
// `vocab`-word lexicon.
inline TinyWorld tiny_world(Rng& rng, std::size_t n_news, std::size_t vocab = 12) {
  static const char* kCategories[] = {"sports", "finance", "health"};
  TinyWorld w;
  for (std::size_t i = 0; i < n_news; ++i) {
    NewsRecord r;
    r.news_id = "N" + std::to_string(i + 1);
    r.category = kCategories[rng.below(3)];
    r.subcategory = rng.bernoulli(0.5) ? "local" : "";
    r.title = random_words(rng, 2 + rng.below(5), vocab);
    r.abstract = random_words(rng, 3 + rng.below(6), vocab);
    w.records.push_back(r);
  }
  w.vocab = build_vocabulary(w.records, 1);
  w.corpus = NewsCorpus::build(w.records, w.vocab, FieldLengths{});
  return w;
}

// Overwrites every parameter with uniform draws in +-scale (padding row
// zero), giving gradients of a comfortable magnitude for checks.
template <typename T>
void randomize(ModelParams<T>& params, Rng& rng, double scale) {
  for (Parameter<T>* p : params.parameters()) {
    for (auto& v : p->value.values()) v = static_cast<T>(rng.uniform(-scale, scale));
  }
  for (std::size_t j = 0; j < params.dims.d; ++j) params.embedding.value(0, j) = T(0);
}

template <typename T>
Tensor<T> random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                        double hi = 1.0) {
  Tensor<T> t = Tensor<T>::zeros(rows, cols);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// A mask of length n with at least one set entry.
inline Mask random_mask(Rng& rng, std::size_t n) {
  Mask m(n, 0);
  for (auto& v : m) v = rng.bernoulli(0.7) ? 1 : 0;
  m[rng.below(n)] = 1;
  return m;
}

}  // namespace tdnr::testing

#endif  // TDNR_TESTS_SUPPORT_FIXTURES_HPP_
