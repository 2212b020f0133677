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

#ifndef TDNR_TRAINING_CONFIG_HPP_
#define TDNR_TRAINING_CONFIG_HPP_

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "tdnr/data/news.hpp"
#include "tdnr/data/synthetic.hpp"
#include "tdnr/encoders.hpp"
#include "tdnr/errors.hpp"
#include "tdnr/objectives.hpp"

namespace tdnr {

enum class ContrastPool { kBatch, kImpression };

inline const char* contrast_pool_name(ContrastPool p) {
  return p == ContrastPool::kBatch ? "batch" : "impression";
}

inline ContrastPool parse_contrast_pool(const std::string& name) {
  if (name == "batch") return ContrastPool::kBatch;
  if (name == "impression") return ContrastPool::kImpression;
  throw ConfigError("cl_pool must be batch or impression, got '" + name + "'");
}

// Shortest decimal that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace config_detail {

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError(key + " expects a non-negative integer, got '" + text + "'");
  }
  return v;
}

inline double parse_real(const std::string& key, const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v)) {
    throw ConfigError(key + " expects a number, got '" + text + "'");
  }
  return v;
}

// Binds one named key to a member.
struct Binding {
  std::string key;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

template <typename U>
  requires std::is_unsigned_v<U> && (!std::is_same_v<U, bool>)
Binding bind(const std::string& key, U& field) {
  return {key, [&field] { return std::to_string(field); },
          [&field, key](const std::string& v) { field = static_cast<U>(parse_unsigned(key, v)); }};
}
inline Binding bind(const std::string& key, double& field) {
  return {key, [&field] { return format_double(field); },
          [&field, key](const std::string& v) { field = parse_real(key, v); }};
}
inline Binding bind(const std::string& key, bool& field) {
  return {key, [&field] { return std::string(field ? "1" : "0"); },
          [&field, key](const std::string& v) {
            if (v == "1" || v == "true") field = true;
            else if (v == "0" || v == "false") field = false;
            else throw ConfigError(key + " expects 0/1, got '" + v + "'");
          }};
}

template <typename Config>
void apply(Config& cfg, const std::string& key, const std::string& value) {
  for (auto& b : cfg.bindings()) {
    if (b.key == key) {
      b.set(value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

template <typename Config>
std::vector<std::pair<std::string, std::string>> entries(const Config& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto& b : const_cast<Config&>(cfg).bindings()) out.emplace_back(b.key, b.get());
  return out;
}

}  // namespace config_detail

struct TrainConfig {
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t attn_hidden = 64;
  std::size_t vocab_cap = 0;  // 0 = unbounded
  std::size_t min_freq = 1;
  std::size_t max_title_len = 20;
  std::size_t max_gen_title_len = 25;
  std::size_t max_abstract_len = 50;
  std::size_t max_history_len = 25;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::uint64_t seed = 42;
  double lr = 2e-5;
  double holdout = 0.2;
  bool gen_title_column = false;
  LossConfig loss;
  ContrastPool cl_pool = ContrastPool::kBatch;
  Variant variant = Variant::kFull;

  std::vector<config_detail::Binding> bindings() {
    using config_detail::bind;
    std::vector<config_detail::Binding> b{
        bind("d", d),
        bind("heads", heads),
        bind("attn_hidden", attn_hidden),
        bind("vocab_cap", vocab_cap),
        bind("min_freq", min_freq),
        bind("max_title_len", max_title_len),
        bind("max_gen_title_len", max_gen_title_len),
        bind("max_abstract_len", max_abstract_len),
        bind("max_history_len", max_history_len),
        bind("neg_ratio", loss.negative_ratio),
        bind("lr", lr),
        bind("batch_size", batch_size),
        bind("epochs", epochs),
        bind("seed", seed),
        bind("focal_alpha", loss.focal_alpha),
        bind("focal_gamma", loss.focal_gamma),
        bind("temperature", loss.temperature),
        bind("lambda1", loss.lambda1),
        bind("holdout", holdout),
        bind("gen_title_column", gen_title_column),
    };
    b.push_back({"cl_pool", [this] { return std::string(contrast_pool_name(cl_pool)); },
                 [this](const std::string& v) { cl_pool = parse_contrast_pool(v); }});
    b.push_back({"variant", [this] { return std::string(variant_name(variant)); },
                 [this](const std::string& v) { variant = parse_variant(v); }});
    return b;
  }

  void set(const std::string& key, const std::string& value) {
    config_detail::apply(*this, key, value);
  }
  std::vector<std::pair<std::string, std::string>> entries() const {
    return config_detail::entries(*this);
  }

  void validate() const {
    if (max_title_len == 0 || max_gen_title_len == 0 || max_abstract_len == 0 ||
        max_history_len == 0) {
      throw ConfigError("all maximum lengths must be positive");
    }
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (min_freq == 0) throw ConfigError("min_freq must be positive");
    if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
    if (holdout < 0.0 || holdout >= 1.0) throw ConfigError("holdout must be in [0, 1)");
    ModelDims{2, d, heads, attn_hidden}.validate();
    loss.validate();
  }

  FieldLengths field_lengths() const {
    return {max_title_len, max_gen_title_len, max_abstract_len};
  }
  ModelDims dims(std::size_t vocab_size) const { return {vocab_size, d, heads, attn_hidden}; }

  // Contrastive weight after variant semantics: no_c2 and no_abs train
  // without the contrastive term.
  double effective_lambda() const {
    return traits_of(variant).contrastive ? loss.lambda1 : 0.0;
  }
};

// Synthetic-generator keys share the key=value syntax.
struct SyntheticSettings {
  SyntheticConfig cfg;

  std::vector<config_detail::Binding> bindings() {
    using config_detail::bind;
    return {bind("n_users", cfg.n_users),
            bind("n_news", cfg.n_news),
            bind("n_topics", cfg.n_topics),
            bind("clickbait_rate", cfg.clickbait_rate),
            bind("seed", cfg.seed),
            bind("impressions_per_user", cfg.impressions_per_user),
            bind("candidates_per_impression", cfg.candidates_per_impression),
            bind("history_min", cfg.history_min),
            bind("history_max", cfg.history_max),
            bind("words_per_topic", cfg.words_per_topic),
            bind("filler_words", cfg.filler_words),
            bind("title_length", cfg.title_length),
            bind("abstract_length", cfg.abstract_length),
            bind("topic_word_share", cfg.topic_word_share),
            bind("n_categories", cfg.n_categories),
            bind("popularity_skew", cfg.popularity_skew),
            bind("entity_words", cfg.entity_words),
            bind("summary_length", cfg.summary_length)};
  }
  void set(const std::string& key, const std::string& value) {
    config_detail::apply(*this, key, value);
  }
  std::vector<std::pair<std::string, std::string>> entries() const {
    return config_detail::entries(*this);
  }
};

// key=value lines; '#' starts a comment; blank lines ignored. Later keys
// overwrite earlier ones.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string raw;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ParseError(line_no, "expected key=value, got '" + line + "'");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

inline std::vector<std::pair<std::string, std::string>> read_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_key_values(in);
}

}  // namespace tdnr

#endif  // TDNR_TRAINING_CONFIG_HPP_
