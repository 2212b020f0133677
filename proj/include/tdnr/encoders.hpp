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

// News and user encoders.
//
// A news article is seen through up to three fields: the category prompt,
// the title and an abstract-side view (the short generated title, or the
// raw abstract for the no_c2 variant). Each field is embedded by mean
// pooling a shared token embedding table.
//
//   candidate:  fields --additive attention--> q_news
//   user:       per field, history sequence --MHSA--> contextualized
//               sequence; per news, fields --additive attention--> q_j;
//               over history, q_j --additive attention--> q_user
//
// Score is the dot product of q_user and q_news. Title and abstract-side
// vectors additionally pass through projection heads for the contrastive
// objective.

#ifndef TDNR_ENCODERS_HPP_
#define TDNR_ENCODERS_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tdnr/data/batch.hpp"
#include "tdnr/data/news.hpp"
#include "tdnr/diffcore/tape.hpp"
#include "tdnr/diffcore/tensor.hpp"
#include "tdnr/errors.hpp"

namespace tdnr {

enum class Variant { kFull, kNoMfke, kNoC2, kNoAbs };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoMfke: return "no_mfke";
    case Variant::kNoC2: return "no_c2";
    case Variant::kNoAbs: return "no_abs";
  }
  return "full";
}

inline Variant parse_variant(const std::string& name) {
  if (name == "full") return Variant::kFull;
  if (name == "no_mfke") return Variant::kNoMfke;
  if (name == "no_c2") return Variant::kNoC2;
  if (name == "no_abs") return Variant::kNoAbs;
  throw ConfigError("unknown variant '" + name + "' (expected full|no_mfke|no_c2|no_abs)");
}

inline constexpr Variant kAllVariants[] = {Variant::kFull, Variant::kNoMfke, Variant::kNoC2,
                                           Variant::kNoAbs};

// What each ablation switches off.
struct VariantTraits {
  bool mfke = true;          // per-field MHSA over the history
  bool contrastive = true;   // cross-field contrastive term
  bool abstract_side = true; // third field present
  bool raw_abstract = false; // third field is the raw abstract, not the short view

  std::vector<Field> fields() const {
    std::vector<Field> out{Field::kCats, Field::kTitle};
    if (abstract_side) out.push_back(raw_abstract ? Field::kAbstract : Field::kGenTitle);
    return out;
  }
  Field abstract_field() const { return raw_abstract ? Field::kAbstract : Field::kGenTitle; }
};

inline VariantTraits traits_of(Variant v) {
  VariantTraits t;
  switch (v) {
    case Variant::kFull: break;
    case Variant::kNoMfke: t.mfke = false; break;
    case Variant::kNoC2:
      t.contrastive = false;
      t.raw_abstract = true;
      break;
    case Variant::kNoAbs:
      t.contrastive = false;
      t.abstract_side = false;
      break;
  }
  return t;
}

struct ModelDims {
  std::size_t vocab_size = 2;
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t attn_hidden = 64;

  void validate() const {
    if (vocab_size < 2 || d == 0 || heads == 0 || attn_hidden == 0) {
      throw ConfigError("model dimensions must be positive (vocab >= 2)");
    }
    if (d % heads != 0) {
      throw ConfigError("head count " + std::to_string(heads) + " does not divide d=" +
                        std::to_string(d));
    }
  }
  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

// score_i = context . tanh(x_i W + b)
template <typename T>
struct AdditiveAttentionParams {
  Parameter<T> projection;  // d x h
  Parameter<T> bias;        // 1 x h
  Parameter<T> context;     // 1 x h

  static AdditiveAttentionParams zeros(const std::string& prefix, std::size_t d, std::size_t h) {
    return {Parameter<T>(prefix + ".projection", Tensor<T>::zeros(d, h)),
            Parameter<T>(prefix + ".bias", Tensor<T>::zeros(1, h)),
            Parameter<T>(prefix + ".context", Tensor<T>::zeros(1, h))};
  }
};

// Head i owns columns [i*d/h, (i+1)*d/h) of every input projection.
template <typename T>
struct MhsaParams {
  std::size_t heads = 1;
  Parameter<T> query;   // d x d
  Parameter<T> key;     // d x d
  Parameter<T> value;   // d x d
  Parameter<T> output;  // d x d

  static MhsaParams zeros(const std::string& prefix, std::size_t d, std::size_t heads) {
    return {heads, Parameter<T>(prefix + ".query", Tensor<T>::zeros(d, d)),
            Parameter<T>(prefix + ".key", Tensor<T>::zeros(d, d)),
            Parameter<T>(prefix + ".value", Tensor<T>::zeros(d, d)),
            Parameter<T>(prefix + ".output", Tensor<T>::zeros(d, d))};
  }
};

// tanh(x W + b), then unit-normalized.
template <typename T>
struct ProjectionHead {
  Parameter<T> weight;  // d x d
  Parameter<T> bias;    // 1 x d

  static ProjectionHead zeros(const std::string& prefix, std::size_t d) {
    return {Parameter<T>(prefix + ".weight", Tensor<T>::zeros(d, d)),
            Parameter<T>(prefix + ".bias", Tensor<T>::zeros(1, d))};
  }
};

template <typename T>
struct ModelParams {
  ModelDims dims;
  Variant variant = Variant::kFull;
  Parameter<T> embedding;  // vocab x d, row 0 is padding
  std::vector<MhsaParams<T>> field_mhsa;  // one per field of the variant
  AdditiveAttentionParams<T> candidate_merge;
  AdditiveAttentionParams<T> history_merge;
  AdditiveAttentionParams<T> user_attention;
  ProjectionHead<T> title_head;
  ProjectionHead<T> abs_head;

  static ModelParams zeros(const ModelDims& dims, Variant variant) {
    dims.validate();
    ModelParams p;
    p.dims = dims;
    p.variant = variant;
    p.embedding = Parameter<T>("embedding", Tensor<T>::zeros(dims.vocab_size, dims.d));
    const auto fields = traits_of(variant).fields();
    static const char* kFieldNames[] = {"cats", "title", "abs"};
    for (std::size_t f = 0; f < fields.size(); ++f) {
      p.field_mhsa.push_back(
          MhsaParams<T>::zeros(std::string("mhsa.") + kFieldNames[f], dims.d, dims.heads));
    }
    p.candidate_merge = AdditiveAttentionParams<T>::zeros("candidate_merge", dims.d, dims.attn_hidden);
    p.history_merge = AdditiveAttentionParams<T>::zeros("history_merge", dims.d, dims.attn_hidden);
    p.user_attention = AdditiveAttentionParams<T>::zeros("user_attention", dims.d, dims.attn_hidden);
    p.title_head = ProjectionHead<T>::zeros("title_head", dims.d);
    p.abs_head = ProjectionHead<T>::zeros("abs_head", dims.d);
    return p;
  }

  std::size_t field_count() const { return field_mhsa.size(); }

  // Fixed registration order; checkpoints and optimizer state rely on it.
  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out{&embedding};
    for (auto& m : field_mhsa) {
      out.insert(out.end(), {&m.query, &m.key, &m.value, &m.output});
    }
    for (auto* a : {&candidate_merge, &history_merge, &user_attention}) {
      out.insert(out.end(), {&a->projection, &a->bias, &a->context});
    }
    out.insert(out.end(), {&title_head.weight, &title_head.bias, &abs_head.weight, &abs_head.bias});
    return out;
  }
  std::vector<const Parameter<T>*> parameters() const {
    auto mut = const_cast<ModelParams*>(this)->parameters();
    return std::vector<const Parameter<T>*>(mut.begin(), mut.end());
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out = ModelParams<U>::zeros(dims, variant);
    auto src = parameters();
    auto dst = out.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst[i]->value = src[i]->value.template cast<U>();
      dst[i]->zero_grad();
    }
    return out;
  }
};

struct AttentionOutput {
  Var weights;  // attention weights over the pooled items
  Var pooled;
};

inline Mask full_mask(std::size_t n) { return Mask(n, 1); }

// Mean of the embedding rows of `tokens`; empty input pools to zeros.
template <typename T>
Var encode_field_tokens(Tape<T>& tape, std::span<const std::int32_t> tokens,
                        ModelParams<T>& params) {
  if (tokens.empty()) {
    const std::int32_t pad = Vocabulary::kPad;
    return tape.embedding_bag(params.embedding, std::span<const std::int32_t>(&pad, 1), 1);
  }
  return tape.embedding_bag(params.embedding, tokens, tokens.size());
}

// Pools the rows of `seq` (n x d). weights: 1 x n, pooled: 1 x d.
template <typename T>
AttentionOutput additive_attention(Tape<T>& tape, Var seq, std::span<const std::uint8_t> mask,
                                   AdditiveAttentionParams<T>& params) {
  const Var hidden = tape.tanh(tape.add_row(tape.matmul(seq, tape.parameter(params.projection)),
                                            tape.parameter(params.bias)));
  const Var scores = tape.matmul_nt(tape.parameter(params.context), hidden);  // 1 x n
  const Var weights = tape.softmax_masked(scores, mask);
  return {weights, tape.matmul(weights, seq)};
}

// Row-wise additive attention across fields: `fields[f]` is (m x d) and row
// r of every field belongs to the same item. weights: m x F, pooled: m x d.
template <typename T>
AttentionOutput merge_fields(Tape<T>& tape, std::span<const Var> fields,
                             AdditiveAttentionParams<T>& params) {
  if (fields.empty()) throw ShapeError("merge_fields: no fields");
  const Var w = tape.parameter(params.projection);
  const Var b = tape.parameter(params.bias);
  const Var e = tape.parameter(params.context);
  std::vector<Var> scores;
  for (Var f : fields) {
    scores.push_back(tape.matmul_nt(tape.tanh(tape.add_row(tape.matmul(f, w), b)), e));
  }
  const Var weights = tape.softmax(tape.concat_last(std::span<const Var>(scores)));
  Var pooled;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const Var part = tape.mul_col(fields[i], tape.slice_cols(weights, i, 1));
    pooled = pooled.valid() ? tape.add(pooled, part) : part;
  }
  return {weights, pooled};
}

// Multi-head scaled dot-product self-attention over a history sequence of
// one field (J x d). Masked positions are excluded as keys and their output
// rows are zero. `attention`, when given, receives each head's J x J map.
template <typename T>
Var mfke_field_sequence(Tape<T>& tape, Var field_vecs, std::span<const std::uint8_t> mask,
                        MhsaParams<T>& params, std::vector<Var>* attention = nullptr) {
  const std::size_t d = tape.value(field_vecs).cols();
  const std::size_t rows = tape.value(field_vecs).rows();
  if (params.heads == 0 || d % params.heads != 0) {
    throw ConfigError("head count " + std::to_string(params.heads) + " does not divide d=" +
                      std::to_string(d));
  }
  if (mask.size() != rows) throw ShapeError("mfke: mask length does not match history");
  bool any = false;
  for (auto m : mask) any = any || m;
  if (!any) throw DegenerateError("mfke: every history position is masked");

  const std::size_t dk = d / params.heads;
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dk));
  const Var q = tape.matmul(field_vecs, tape.parameter(params.query));
  const Var k = tape.matmul(field_vecs, tape.parameter(params.key));
  const Var v = tape.matmul(field_vecs, tape.parameter(params.value));
  std::vector<Var> heads;
  for (std::size_t h = 0; h < params.heads; ++h) {
    const Var qh = tape.slice_cols(q, h * dk, dk);
    const Var kh = tape.slice_cols(k, h * dk, dk);
    const Var vh = tape.slice_cols(v, h * dk, dk);
    const Var att = tape.softmax_masked(tape.scale(tape.matmul_nt(qh, kh), inv_sqrt), mask);
    if (attention) attention->push_back(att);
    heads.push_back(tape.matmul(att, vh));
  }
  const Var mixed = tape.matmul(tape.concat_last(std::span<const Var>(heads)),
                                tape.parameter(params.output));
  Tensor<T> keep = Tensor<T>::zeros(rows, 1);
  for (std::size_t i = 0; i < rows; ++i) keep[i] = mask[i] ? T(1) : T(0);
  return tape.mul_col(mixed, tape.constant(std::move(keep)));
}

// Pooled field vectors (rows x d per field) for a list of articles.
template <typename T>
std::vector<Var> embed_fields(Tape<T>& tape, std::span<const std::size_t> news,
                              const NewsCorpus& corpus, ModelParams<T>& params) {
  std::vector<Var> out;
  for (Field f : traits_of(params.variant).fields()) {
    const FieldTokens toks = pad_field(news, corpus, f);
    out.push_back(tape.embedding_bag(params.embedding, toks.ids, toks.width));
  }
  return out;
}

// Candidate-side merge of one article's fields. weights: 1 x F, pooled: 1 x d.
template <typename T>
AttentionOutput encode_candidate_news(Tape<T>& tape, const NewsArticle& article,
                                      ModelParams<T>& params) {
  std::vector<Var> fields;
  for (Field f : traits_of(params.variant).fields()) {
    fields.push_back(encode_field_tokens(tape, field_tokens(article, f), params));
  }
  return merge_fields(tape, std::span<const Var>(fields), params.candidate_merge);
}

// User representation from per-field history sequences (each J x d) with a
// J-long mask. Returns weights 1 x J and pooled 1 x d; an empty or fully
// masked history yields a constant zero vector (weights invalid).
template <typename T>
AttentionOutput encode_user(Tape<T>& tape, std::span<const Var> field_seqs,
                            std::span<const std::uint8_t> mask, ModelParams<T>& params) {
  const std::size_t d = params.dims.d;
  bool any = false;
  for (auto m : mask) any = any || m;
  if (field_seqs.empty() || mask.empty() || !any) {
    return {Var{}, tape.constant(Tensor<T>::zeros(1, d))};
  }
  if (field_seqs.size() != params.field_count()) {
    throw ShapeError("encode_user: " + std::to_string(field_seqs.size()) + " fields for a " +
                     std::to_string(params.field_count()) + "-field model");
  }
  const bool use_mfke = traits_of(params.variant).mfke;
  std::vector<Var> context;
  for (std::size_t f = 0; f < field_seqs.size(); ++f) {
    context.push_back(use_mfke ? mfke_field_sequence(tape, field_seqs[f], mask, params.field_mhsa[f])
                               : field_seqs[f]);
  }
  const AttentionOutput per_news =
      merge_fields(tape, std::span<const Var>(context), params.history_merge);
  return additive_attention(tape, per_news.pooled, mask, params.user_attention);
}

// Convenience form over resolved history articles.
template <typename T>
AttentionOutput encode_user(Tape<T>& tape, std::span<const std::size_t> history,
                            const NewsCorpus& corpus, ModelParams<T>& params) {
  if (history.empty()) return {Var{}, tape.constant(Tensor<T>::zeros(1, params.dims.d))};
  const auto fields = embed_fields(tape, history, corpus, params);
  const Mask mask = full_mask(history.size());
  return encode_user(tape, std::span<const Var>(fields), mask, params);
}

// Unit-norm contrastive view of field vectors (rows x d).
template <typename T>
Var project_for_contrast(Tape<T>& tape, Var field_vecs, ProjectionHead<T>& head) {
  const Var hidden = tape.tanh(tape.add_row(tape.matmul(field_vecs, tape.parameter(head.weight)),
                                            tape.parameter(head.bias)));
  return tape.l2_normalize(hidden);
}

}  // namespace tdnr

#endif  // TDNR_ENCODERS_HPP_
