// Copyright 2026 The fluxlattice Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fluxlattice {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: violated precondition, malformed config, inconsistent shapes.
/// The CLI maps this to exit code 2.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A computation ran but its result cannot be trusted (trace drift, gap
/// closure, non-convergence). The CLI maps this to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class GapClosureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Collects non-fatal warnings. Functions that can warn take an optional
/// `Diagnostics*`; passing nullptr discards the messages.
class Diagnostics {
 public:
  void warn(std::string message) { warnings_.push_back(std::move(message)); }
  const std::vector<std::string>& warnings() const { return warnings_; }
  bool empty() const { return warnings_.empty(); }

 private:
  std::vector<std::string> warnings_;
};

inline void warn(Diagnostics* diag, std::string message) {
  if (diag != nullptr) diag->warn(std::move(message));
}

}  // namespace fluxlattice
