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

// Parameter initialization and the training loop with its batched forward pass.

#ifndef TDNR_TRAINING_TRAINER_HPP_
#define TDNR_TRAINING_TRAINER_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tdnr/data/batch.hpp"
#include "tdnr/data/behaviors.hpp"
#include "tdnr/data/news.hpp"
#include "tdnr/diffcore/adam.hpp"
#include "tdnr/diffcore/tape.hpp"
#include "tdnr/encoders.hpp"
#include "tdnr/errors.hpp"
#include "tdnr/objectives.hpp"
#include "tdnr/random.hpp"
#include "tdnr/training/config.hpp"

namespace tdnr {

inline constexpr double kEmbeddingInitBound = 0.1;
// Training draws from a stream distinct from initialization.
inline constexpr std::uint64_t kTrainingStreamSalt = 0x9E3779B97F4A7C15ull;

inline double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// Glorot-uniform matrices, zero biases, embedding rows in +-0.1 with the
// padding row zeroed. A 1 x h context vector counts as an h x 1 matrix.
template <typename T>
ModelParams<T> init_params(const TrainConfig& cfg, std::size_t vocab_size, std::uint64_t seed) {
  cfg.validate();
  ModelParams<T> params = ModelParams<T>::zeros(cfg.dims(vocab_size), cfg.variant);
  Rng rng(seed);
  for (Parameter<T>* p : params.parameters()) {
    auto values = p->value.values();
    const std::string& name = p->name;
    if (name == "embedding") {
      const std::size_t d = p->value.cols();
      for (std::size_t k = d; k < values.size(); ++k) {
        values[k] = static_cast<T>(rng.uniform(-kEmbeddingInitBound, kEmbeddingInitBound));
      }
      continue;
    }
    if (name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0) continue;
    std::size_t fan_in = p->value.rows();
    std::size_t fan_out = p->value.cols();
    if (fan_in == 1) std::swap(fan_in, fan_out);
    const double bound = glorot_bound(fan_in, fan_out);
    for (auto& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
  }
  return params;
}

// Tokenized news with its vocabulary, plus the parsed impressions of one run.
struct Dataset {
  std::vector<NewsRecord> records;
  Vocabulary vocab;
  NewsCorpus corpus;
  std::vector<ImpressionLog> impressions;
};

inline Dataset load_dataset(std::istream& news, std::istream& behaviors, const TrainConfig& cfg,
                            const Vocabulary* fixed_vocab = nullptr) {
  Dataset ds;
  ds.records = parse_news_table(news, NewsTableOptions{cfg.gen_title_column});
  ds.vocab = fixed_vocab ? *fixed_vocab : build_vocabulary(ds.records, cfg.min_freq, cfg.vocab_cap);
  ds.corpus = NewsCorpus::build(ds.records, ds.vocab, cfg.field_lengths());
  ds.impressions = parse_behaviors(behaviors, cfg.max_history_len);
  validate_impressions(ds.impressions, ds.corpus);
  return ds;
}

struct BatchForward {
  Var scores;     // samples x (1 + K)
  Var rec_loss;
  Var cl_loss;    // invalid when the contrastive term is off
  Var total;
};

struct TrainStats {
  std::size_t projection_evaluations = 0;  // calls into the projection heads
  std::size_t batches = 0;
  std::size_t samples = 0;
};

// Contrastive views of the pool rows in `rows`, restricted to news whose
// title and abstract-side fields are both non-empty.
inline std::vector<std::size_t> contrastive_rows(const Batch& batch, Field abstract_field,
                                                 std::span<const std::size_t> rows) {
  const FieldTokens& title = batch.field(Field::kTitle);
  const FieldTokens& abs = batch.field(abstract_field);
  std::vector<std::size_t> out;
  for (std::size_t r : rows) {
    if (title.mask[r * title.width] && abs.mask[r * abs.width]) out.push_back(r);
  }
  return out;
}

// Records the full objective for one batch. `lambda1` is the effective
// contrastive weight; at zero the projection heads are never touched.
template <typename T>
BatchForward forward_batch(Tape<T>& tape, ModelParams<T>& params, const Batch& batch,
                           const LossConfig& loss, double lambda1, ContrastPool pool,
                           TrainStats* stats = nullptr) {
  const VariantTraits traits = traits_of(params.variant);
  const std::vector<Field> fields = traits.fields();
  std::vector<Var> field_vecs;
  for (Field f : fields) {
    const FieldTokens& toks = batch.field(f);
    field_vecs.push_back(tape.embedding_bag(params.embedding, toks.ids, toks.width));
  }
  const Var news_vecs =
      merge_fields(tape, std::span<const Var>(field_vecs), params.candidate_merge).pooled;

  // Samples drawn from one impression share a history; encode it once.
  std::map<std::vector<std::size_t>, Var> users;
  std::vector<Var> score_rows;
  for (std::size_t s = 0; s < batch.samples; ++s) {
    const auto hist = batch.history_row(s);
    const auto mask = batch.history_mask_row(s);
    std::vector<std::size_t> key;
    for (std::size_t j = 0; j < hist.size(); ++j) {
      if (mask[j]) key.push_back(hist[j]);
    }
    auto it = users.find(key);
    if (it == users.end()) {
      std::vector<Var> seqs;
      if (!key.empty()) {
        for (Var f : field_vecs) seqs.push_back(tape.gather_rows(f, hist));
      }
      const Var user = encode_user(tape, std::span<const Var>(seqs), mask, params).pooled;
      it = users.emplace(std::move(key), user).first;
    }
    const Var cands = tape.gather_rows(news_vecs, batch.candidate_row(s));
    score_rows.push_back(click_scores(tape, it->second, cands));
  }

  BatchForward out;
  out.scores = tape.concat_rows(std::span<const Var>(score_rows));
  out.rec_loss = recommendation_loss(tape, out.scores, loss);
  out.total = out.rec_loss;
  if (lambda1 > 0.0 && traits.contrastive) {
    const std::size_t title_idx = 1;
    const std::size_t abs_idx = 2;
    const Field abs_field = traits.abstract_field();
    const Var titles = project_for_contrast(tape, field_vecs[title_idx], params.title_head);
    const Var abstracts = project_for_contrast(tape, field_vecs[abs_idx], params.abs_head);
    if (stats) stats->projection_evaluations += 2;
    if (pool == ContrastPool::kBatch) {
      std::vector<std::size_t> all(batch.pool.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const auto rows = contrastive_rows(batch, abs_field, all);
      if (!rows.empty()) {
        out.cl_loss = contrastive_loss(tape, tape.gather_rows(titles, rows),
                                       tape.gather_rows(abstracts, rows), loss.temperature);
      }
    } else {
      std::vector<Var> per_sample;
      for (std::size_t s = 0; s < batch.samples; ++s) {
        const auto rows = contrastive_rows(batch, abs_field, batch.impression_pools[s]);
        if (rows.empty()) continue;
        per_sample.push_back(contrastive_loss(tape, tape.gather_rows(titles, rows),
                                              tape.gather_rows(abstracts, rows),
                                              loss.temperature));
      }
      if (!per_sample.empty()) out.cl_loss = tape.mean(tape.concat_rows(std::span<const Var>(per_sample)));
    }
    if (out.cl_loss.valid()) out.total = total_loss(tape, out.rec_loss, out.cl_loss, lambda1);
  }
  return out;
}

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double l_rec = 0.0;
  double l_cl = 0.0;
  double l_total = 0.0;
};

inline void write_training_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,l_rec,l_cl,l_total\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_double(e.l_rec) << ',' << format_double(e.l_cl) << ','
        << format_double(e.l_total) << '\n';
  }
}

// Everything needed to continue training exactly where it stopped.
template <typename T>
struct TrainerState {
  ModelParams<T> params;
  AdamState<T> adam;
  Rng rng;
  std::size_t epochs_done = 0;
};

template <typename T>
TrainerState<T> init_trainer(const TrainConfig& cfg, std::size_t vocab_size) {
  TrainerState<T> state;
  state.params = init_params<T>(cfg, vocab_size, cfg.seed);
  state.adam = AdamState<T>::for_parameters(state.params.parameters());
  state.rng = Rng(cfg.seed ^ kTrainingStreamSalt);
  return state;
}

inline bool has_training_signal(const std::vector<ImpressionLog>& impressions) {
  for (const auto& imp : impressions) {
    if (imp.positives() > 0 && imp.negatives() > 0) return true;
  }
  return false;
}

// One pass over `impressions` in a freshly shuffled order.
template <typename T>
EpochLog train_epoch(TrainerState<T>& state, const TrainConfig& cfg, const NewsCorpus& corpus,
                     const std::vector<ImpressionLog>& impressions, TrainStats* stats = nullptr) {
  if (!has_training_signal(impressions)) {
    throw ContractError("training data has no impression with both clicks and non-clicks");
  }
  std::vector<std::size_t> order(impressions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  state.rng.shuffle(order);
  std::vector<TrainingSample> samples;
  for (std::size_t i : order) {
    auto part = sample_training_instances(impressions[i], corpus, cfg.loss.negative_ratio, state.rng);
    samples.insert(samples.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
  }

  const std::vector<Field> fields = traits_of(cfg.variant).fields();
  const double lambda1 = cfg.effective_lambda();
  const AdamOptions adam{cfg.lr};
  auto params = state.params.parameters();
  double rec_sum = 0.0, cl_sum = 0.0, total_sum = 0.0;
  Tape<T> tape;
  for (std::size_t start = 0; start < samples.size(); start += cfg.batch_size) {
    const std::size_t n = std::min(cfg.batch_size, samples.size() - start);
    const Batch batch = assemble_batch(std::span<const TrainingSample>(samples).subspan(start, n),
                                       corpus, fields);
    tape.clear();
    state.params.zero_grad();
    const BatchForward f = forward_batch(tape, state.params, batch, cfg.loss, lambda1, cfg.cl_pool, stats);
    const double rec = static_cast<double>(tape.value(f.rec_loss).item());
    const double cl = f.cl_loss.valid() ? static_cast<double>(tape.value(f.cl_loss).item()) : 0.0;
    const double total = static_cast<double>(tape.value(f.total).item());
    if (!std::isfinite(total)) {
      throw NumericError("non-finite loss in epoch " + std::to_string(state.epochs_done + 1));
    }
    tape.backward(f.total);
    for (Parameter<T>* p : params) {
      if (!p->grad.all_finite()) throw NumericError("non-finite gradient for " + p->name);
    }
    adam_step(std::span<Parameter<T>* const>(params), state.adam, adam);
    rec_sum += rec * static_cast<double>(n);
    cl_sum += cl * static_cast<double>(n);
    total_sum += total * static_cast<double>(n);
    if (stats) {
      ++stats->batches;
      stats->samples += n;
    }
  }
  state.params.zero_grad();
  ++state.epochs_done;
  const double count = static_cast<double>(samples.size());
  return {state.epochs_done, rec_sum / count, cl_sum / count, total_sum / count};
}

template <typename T>
std::vector<EpochLog> train_epochs(TrainerState<T>& state, const TrainConfig& cfg,
                                   const NewsCorpus& corpus,
                                   const std::vector<ImpressionLog>& impressions,
                                   std::size_t epochs, TrainStats* stats = nullptr) {
  std::vector<EpochLog> log;
  for (std::size_t e = 0; e < epochs; ++e) {
    log.push_back(train_epoch(state, cfg, corpus, impressions, stats));
  }
  return log;
}

template <typename T>
struct TrainResult {
  TrainerState<T> state;
  std::vector<EpochLog> log;
  TrainStats stats;
};

// Trains `cfg.epochs` epochs from a fresh initialization.
template <typename T = float>
TrainResult<T> train(const TrainConfig& cfg, const NewsCorpus& corpus, std::size_t vocab_size,
                     const std::vector<ImpressionLog>& impressions) {
  cfg.validate();
  if (!has_training_signal(impressions)) {
    throw ContractError("training data has no impression with both clicks and non-clicks");
  }
  TrainResult<T> out;
  out.state = init_trainer<T>(cfg, vocab_size);
  out.log = train_epochs(out.state, cfg, corpus, impressions, cfg.epochs, &out.stats);
  return out;
}

}  // namespace tdnr

#endif  // TDNR_TRAINING_TRAINER_HPP_
