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

// Binary checkpoint format.
//
//   "TDNR" | u8 version | u32 LE manifest length | manifest (UTF-8) | blob
//
// The manifest is line oriented:
//
//   [config]   key=value for every training key
//   [state]    epochs_done, adam_step, rng engine state
//   [vocab]    count, then one learned token per line
//   [tensors]  name rowsxcols byte_offset byte_length
//
// Tensors are the model parameters in registration order followed by the
// Adam first moments ("adam.m/<name>") and second moments ("adam.v/<name>").
// The blob is their little-endian float32 values back to back; offsets are
// contiguous and cover it exactly.

#ifndef TDNR_TRAINING_CHECKPOINT_HPP_
#define TDNR_TRAINING_CHECKPOINT_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tdnr/data/news.hpp"
#include "tdnr/errors.hpp"
#include "tdnr/training/config.hpp"
#include "tdnr/training/trainer.hpp"

namespace tdnr {

inline constexpr char kCheckpointMagic[4] = {'T', 'D', 'N', 'R'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainConfig config;
  Vocabulary vocab;
  TrainerState<float> state;
};

namespace checkpoint_detail {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

inline void put_floats(std::string& out, const Tensor<float>& t) {
  for (float f : t.storage()) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

struct TensorEntry {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
  std::size_t bytes = 0;
};

// Tensors a checkpoint of `state` stores, in blob order.
inline std::vector<std::pair<std::string, Tensor<float>*>> stored_tensors(TrainerState<float>& state) {
  std::vector<std::pair<std::string, Tensor<float>*>> out;
  auto params = state.params.parameters();
  if (state.adam.first_moment.size() != params.size()) {
    state.adam = AdamState<float>::for_parameters(params);
  }
  for (auto* p : params) out.emplace_back(p->name, &p->value);
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.emplace_back("adam.m/" + params[i]->name, &state.adam.first_moment[i]);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.emplace_back("adam.v/" + params[i]->name, &state.adam.second_moment[i]);
  }
  return out;
}

inline std::size_t parse_count(const std::string& key, const std::string& text) {
  try {
    return static_cast<std::size_t>(config_detail::parse_unsigned(key, text));
  } catch (const ConfigError& e) {
    throw LoadError(e.what());
  }
}

}  // namespace checkpoint_detail

inline std::string encode_checkpoint(const Checkpoint& ckpt) {
  using namespace checkpoint_detail;
  Checkpoint copy = ckpt;
  auto tensors = stored_tensors(copy.state);

  std::ostringstream manifest;
  manifest << "[config]\n";
  for (const auto& [k, v] : copy.config.entries()) manifest << k << '=' << v << '\n';
  manifest << "[state]\n"
           << "epochs_done=" << copy.state.epochs_done << '\n'
           << "adam_step=" << copy.state.adam.step << '\n'
           << "rng=" << copy.state.rng.state() << '\n';
  const auto tokens = copy.vocab.learned_tokens();
  manifest << "[vocab]\ncount=" << tokens.size() << '\n';
  for (const auto& t : tokens) manifest << t << '\n';
  manifest << "[tensors]\n";
  std::size_t offset = 0;
  for (const auto& [name, t] : tensors) {
    const std::size_t bytes = t->size() * sizeof(float);
    manifest << name << ' ' << t->rows() << 'x' << t->cols() << ' ' << offset << ' ' << bytes
             << '\n';
    offset += bytes;
  }
  const std::string text = manifest.str();

  std::string out(kCheckpointMagic, 4);
  out.push_back(static_cast<char>(kCheckpointVersion));
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : tensors) put_floats(out, *t);
  return out;
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  using namespace checkpoint_detail;
  constexpr std::size_t kHeader = 4 + 1 + 4;
  if (bytes.size() < kHeader) throw LoadError("checkpoint truncated: header incomplete");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw LoadError("bad magic bytes");
  const auto version = static_cast<std::uint8_t>(bytes[4]);
  if (version != kCheckpointVersion) {
    throw LoadError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::size_t manifest_len = get_u32(bytes, 5);
  if (bytes.size() - kHeader < manifest_len) throw LoadError("checkpoint truncated: manifest incomplete");
  const std::string manifest(bytes.substr(kHeader, manifest_len));
  const std::string_view blob = bytes.substr(kHeader + manifest_len);

  Checkpoint ckpt;
  std::istringstream in(manifest);
  std::string line, section;
  std::vector<std::string> vocab_tokens;
  std::size_t vocab_count = 0;
  bool have_count = false;
  std::vector<TensorEntry> entries;
  std::string rng_state;
  bool have_rng = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '[') {
      section = line;
      continue;
    }
    if (section == "[vocab]" && have_count) {
      vocab_tokens.push_back(line);
      continue;
    }
    if (section == "[tensors]") {
      std::istringstream fields(line);
      TensorEntry e;
      std::string shape;
      if (!(fields >> e.name >> shape >> e.offset >> e.bytes)) {
        throw LoadError("malformed tensor entry '" + line + "'");
      }
      const auto x = shape.find('x');
      if (x == std::string::npos) throw LoadError("malformed tensor shape '" + shape + "'");
      e.rows = parse_count("rows", shape.substr(0, x));
      e.cols = parse_count("cols", shape.substr(x + 1));
      entries.push_back(std::move(e));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw LoadError("malformed manifest line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (section == "[config]") {
      try {
        ckpt.config.set(key, value);
      } catch (const ConfigError& e) {
        throw LoadError(std::string("checkpoint config: ") + e.what());
      }
    } else if (section == "[state]") {
      if (key == "epochs_done") ckpt.state.epochs_done = parse_count(key, value);
      else if (key == "adam_step") ckpt.state.adam.step = parse_count(key, value);
      else if (key == "rng") {
        rng_state = value;
        have_rng = true;
      } else {
        throw LoadError("unknown state key '" + key + "'");
      }
    } else if (section == "[vocab]" && key == "count") {
      vocab_count = parse_count(key, value);
      have_count = true;
    } else {
      throw LoadError("unexpected manifest line '" + line + "' in section " + section);
    }
  }
  if (!have_count || vocab_tokens.size() != vocab_count) {
    throw LoadError("vocabulary block does not match its count");
  }
  if (!have_rng) throw LoadError("manifest lacks rng state");
  try {
    ckpt.config.validate();
  } catch (const ConfigError& e) {
    throw LoadError(std::string("checkpoint config: ") + e.what());
  }
  ckpt.vocab = Vocabulary::from_tokens(vocab_tokens);
  ckpt.state.rng.set_state(rng_state);
  ckpt.state.params = ModelParams<float>::zeros(ckpt.config.dims(ckpt.vocab.size()), ckpt.config.variant);
  const std::uint64_t adam_step = ckpt.state.adam.step;
  ckpt.state.adam = AdamState<float>::for_parameters(ckpt.state.params.parameters());
  ckpt.state.adam.step = adam_step;

  auto tensors = stored_tensors(ckpt.state);
  if (entries.size() != tensors.size()) {
    throw LoadError("manifest lists " + std::to_string(entries.size()) + " tensors, config implies " +
                    std::to_string(tensors.size()));
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const TensorEntry& e = entries[i];
    Tensor<float>& t = *tensors[i].second;
    if (e.name != tensors[i].first) {
      throw LoadError("tensor " + std::to_string(i) + " is '" + e.name + "', expected '" +
                      tensors[i].first + "'");
    }
    if (e.rows != t.rows() || e.cols != t.cols()) {
      throw LoadError("tensor '" + e.name + "' is " + std::to_string(e.rows) + "x" +
                      std::to_string(e.cols) + " but config implies " + shape_string(t.shape()));
    }
    if (e.offset != offset || e.bytes != t.size() * sizeof(float)) {
      throw LoadError("tensor '" + e.name + "' offsets are not contiguous");
    }
    offset += e.bytes;
  }
  if (blob.size() < offset) throw LoadError("checkpoint truncated: blob shorter than manifest");
  if (blob.size() > offset) throw LoadError("blob size does not match manifest");
  std::size_t at = 0;
  for (auto& [name, t] : tensors) {
    for (float& v : t->storage()) {
      v = std::bit_cast<float>(get_u32(blob, at));
      at += 4;
    }
  }
  for (auto* p : ckpt.state.params.parameters()) p->zero_grad();
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot open '" + path + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw LoadError("failed writing '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace tdnr

#endif  // TDNR_TRAINING_CHECKPOINT_HPP_
