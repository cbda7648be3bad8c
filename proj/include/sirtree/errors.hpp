// Copyright 2026 The sirtree Authors
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

#ifndef SIRTREE_ERRORS_HPP_
#define SIRTREE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace sirtree {

// Argument outside the mathematical domain of a function (λ ≤ 1, x < -1/e, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A precondition on simulation state was violated (empty active set, s_k < 1).
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A sampler exceeded its node or step budget.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid experiment configuration. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require_domain(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

}  // namespace detail
}  // namespace sirtree

#endif  // SIRTREE_ERRORS_HPP_
