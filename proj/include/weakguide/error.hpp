// Copyright 2026 The weakguide Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef WEAKGUIDE_ERROR_HPP_
#define WEAKGUIDE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace weakguide {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A token or attribute that is not part of the codec vocabulary.
class VocabularyError : public Error {
 public:
  explicit VocabularyError(const std::string& token)
      : Error("unknown token '" + token + "'"), token_(token) {}
  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

// Row of zero norm that would receive a nonzero edit.
class DegenerateRowError : public Error {
 public:
  explicit DegenerateRowError(int row)
      : Error("cannot renormalize degenerate row " + std::to_string(row)),
        row_(row) {}
  int row() const { return row_; }

 private:
  int row_;
};

class UnknownContextError : public Error {
 public:
  explicit UnknownContextError(const std::string& context)
      : Error("unknown context '" + context + "'") {}
};

// Attribute classification requested on an object context.
class NoAttributeError : public Error {
 public:
  explicit NoAttributeError(const std::string& context)
      : Error("context '" + context + "' has no attribute components") {}
};

class StepUnderflowError : public Error {
 public:
  StepUnderflowError() : Error("reverse step requested at t = 0") {}
};

// Malformed configuration. `key` names the offending entry.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& message)
      : Error(key + ": " + message), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

}  // namespace weakguide

#endif  // WEAKGUIDE_ERROR_HPP_
