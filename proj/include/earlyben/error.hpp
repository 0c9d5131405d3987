// Copyright 2026 The earlyben Authors
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

#pragma once

#include <stdexcept>
#include <string>

namespace earlyben {

/// Broad failure classes. The numeric value doubles as the CLI exit code.
enum class ErrorCategory : int {
  runtime = 1,
  usage = 2,
  format = 3,
  persistence = 4,
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::runtime: return "runtime";
    case ErrorCategory::usage: return "usage";
    case ErrorCategory::format: return "format";
    case ErrorCategory::persistence: return "persistence";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// A precondition on a numeric or structural argument was violated.
class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

/// Malformed input file (ragged rows, bad numbers, inconsistent dimension).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorCategory::format, what) {}
};

/// An instance cannot be repaired by preprocessing (all-missing channel,
/// trimming would remove every tick).
class UnrecoverableInstanceError : public Error {
 public:
  explicit UnrecoverableInstanceError(const std::string& what)
      : Error(ErrorCategory::format, what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorCategory::runtime, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCategory::runtime, what) {}
};

class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error(ErrorCategory::runtime, what) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& what) : Error(ErrorCategory::runtime, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::usage, what) {}
};

class PersistenceError : public Error {
 public:
  explicit PersistenceError(const std::string& what)
      : Error(ErrorCategory::persistence, what) {}
};

}  // namespace earlyben
