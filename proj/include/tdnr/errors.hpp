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

#ifndef TDNR_ERRORS_HPP_
#define TDNR_ERRORS_HPP_

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tdnr {

// Root of every error the library throws. `kind()` is a short stable tag used
// in machine-parsable CLI diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("shape", what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error("domain", what) {}
};

// Fully-masked softmax rows, near-zero vectors passed to normalization.
class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& what)
      : Error("degenerate", what) {}
};

class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error("contract", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("parse", "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateIdError : public Error {
 public:
  explicit DuplicateIdError(const std::string& id)
      : Error("duplicate_id", "duplicate news id '" + id + "'"), id_(id) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class LoadError : public Error {
 public:
  explicit LoadError(const std::string& what) : Error("load", what) {}
};

// A NaN or Inf surfaced during training or evaluation.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

}  // namespace tdnr

#endif  // TDNR_ERRORS_HPP_
