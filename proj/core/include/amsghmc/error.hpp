// Copyright 2026 The amsghmc Authors
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

namespace amsghmc {

class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

/// A documented precondition of an operation was violated.
class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what)
      : Error("precondition", what) {}
};

/// Bad or inconsistent configuration (unknown keys, unknown category, ...).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

/// A numerical evaluation produced a non-finite value.
class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, int node)
      : Error("evaluation", what), node_(node) {}
  int node() const { return node_; }

 private:
  int node_;
};

/// Every chain of a run diverged, or training lost too many chains.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what)
      : Error("divergence", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

}  // namespace amsghmc
