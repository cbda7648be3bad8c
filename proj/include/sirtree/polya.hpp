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

// Two-colour urn with a deterministic replacement sequence X_k >= -1: draw a
// ball, return it with X_k copies of its colour, or remove it when X_k = -1.

#ifndef SIRTREE_POLYA_HPP_
#define SIRTREE_POLYA_HPP_

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "sirtree/errors.hpp"
#include "sirtree/rng.hpp"

namespace sirtree {

struct UrnState {
  std::int64_t R = 0;  // red balls
  std::int64_t s = 0;  // total balls

  double proportion() const { return static_cast<double>(R) / static_cast<double>(s); }
  std::int64_t blue() const { return s - R; }
};

namespace detail {
inline void require_replacement(std::int64_t s, std::int64_t x) {
  require(x >= -1, "urn: replacement must be >= -1");
  require(s + x >= 1, "urn: the urn would become empty");
}
}  // namespace detail

// One draw. `red_drawn`, when given, receives B_{k+1}.
inline UrnState urn_step(const UrnState& state, std::int64_t x, RngStream& rng, bool* red_drawn = nullptr) {
  detail::require(state.s >= 1 && state.R >= 0 && state.R <= state.s, "urn_step: invalid state");
  detail::require_replacement(state.s, x);
  const bool red = rng.uniform() * static_cast<double>(state.s) < static_cast<double>(state.R);
  if (red_drawn) *red_drawn = red;
  return UrnState{state.R + (red ? x : 0), state.s + x};
}

// Totals s_0..s_k for s_0 = r0 + b0, validating s_k >= 1.
inline std::vector<std::int64_t> urn_totals(std::int64_t s0, std::span<const std::int64_t> X) {
  std::vector<std::int64_t> s{s0};
  s.reserve(X.size() + 1);
  for (auto x : X) {
    detail::require_replacement(s.back(), x);
    s.push_back(s.back() + x);
  }
  return s;
}

namespace detail {
inline void require_urn_start(std::int64_t r0, std::int64_t b0) {
  require(r0 >= 1 && b0 >= 1, "urn: need at least one ball of each colour");
}
}  // namespace detail

// u_k = E[(R_k/s_k)^2] by the exact recursion
//   u_{k+1} = (1 - X²/s²) u_k + (r0/s0) X²/s²,  with X = X_{k+1}, s = s_{k+1}.
inline std::vector<double> moment_recursion(std::int64_t r0, std::int64_t b0, std::span<const std::int64_t> X,
                                            std::size_t k_max) {
  detail::require_urn_start(r0, b0);
  detail::require(k_max <= X.size(), "moment_recursion: k_max beyond the sequence");
  const auto s = urn_totals(r0 + b0, X.first(k_max));
  const double c = static_cast<double>(r0) / static_cast<double>(r0 + b0);
  std::vector<double> u{c * c};
  u.reserve(k_max + 1);
  for (std::size_t k = 0; k < k_max; ++k) {
    const double a = static_cast<double>(X[k]) / static_cast<double>(s[k + 1]);
    const double a2 = a * a;
    u.push_back((1.0 - a2) * u.back() + c * a2);
  }
  return u;
}

// Π_{j<=k} (1 - X_j²/s_j²) for k = 0..k_max.
inline std::vector<double> urn_products(std::int64_t s0, std::span<const std::int64_t> X, std::size_t k_max) {
  const auto s = urn_totals(s0, X.first(k_max));
  std::vector<double> prod{1.0};
  prod.reserve(k_max + 1);
  for (std::size_t k = 0; k < k_max; ++k) {
    const double a = static_cast<double>(X[k]) / static_cast<double>(s[k + 1]);
    prod.push_back(prod.back() * (1.0 - a * a));
  }
  return prod;
}

// u_k = r0/s0 + (r0²/s0² - r0/s0) Π_{j<=k}(1 - X_j²/s_j²).
inline std::vector<double> moment_closed_form(std::int64_t r0, std::int64_t b0, std::span<const std::int64_t> X,
                                              std::size_t k_max) {
  detail::require_urn_start(r0, b0);
  detail::require(k_max <= X.size(), "moment_closed_form: k_max beyond the sequence");
  const double c = static_cast<double>(r0) / static_cast<double>(r0 + b0);
  auto prod = urn_products(r0 + b0, X, k_max);
  for (auto& p : prod) p = c + (c * c - c) * p;
  return prod;
}

// E[R_{k+1}/s_{k+1} | R_k] from the two outcomes, against R_k/s_k.
struct UrnMartingaleCheck {
  double lhs;
  double rhs;
  double residual;
};

inline UrnMartingaleCheck urn_martingale_check(const UrnState& state, std::int64_t x) {
  detail::require(state.s >= 1 && state.R >= 0 && state.R <= state.s, "urn_martingale_check: invalid state");
  detail::require_replacement(state.s, x);
  const double R = static_cast<double>(state.R);
  const double s = static_cast<double>(state.s);
  const double s1 = s + static_cast<double>(x);
  const double p = R / s;
  const double lhs = (R + static_cast<double>(x)) / s1 * p + R / s1 * (1.0 - p);
  return {lhs, p, std::abs(lhs - p)};
}

// ---------------------------------------------------------------------------
// Bernoulli-limit criterion. The limit Z of R_k/s_k is Bernoulli iff
// Π (1 - X_j²/s_j²) = 0, i.e. unless s_k >= 2 for all k and Σ (X_k/s_k)² < ∞.

// Tail repeating `pattern` forever after the prefix. Covers constant tails,
// eventually-zero tails ({0}) and alternating ones ({+1, -1}).
struct PeriodicTail {
  std::vector<std::int64_t> pattern;
};

// Tail with |X_k| <= max_abs and s_k >= max(floor, slope * k).
struct BoundedTail {
  std::int64_t max_abs;
  double slope;
  std::int64_t floor = 2;
};

struct XDescriptor {
  std::vector<std::int64_t> prefix;
  std::variant<std::monostate, PeriodicTail, BoundedTail> tail;
};

enum class UrnLimit { kBernoulli, kNonBernoulli, kUndecided };

inline std::string_view to_string(UrnLimit v) {
  switch (v) {
    case UrnLimit::kBernoulli:
      return "bernoulli";
    case UrnLimit::kNonBernoulli:
      return "non-bernoulli";
    case UrnLimit::kUndecided:
      return "undecided";
  }
  return "unknown";
}

struct CriterionResult {
  UrnLimit verdict;
  double partial_product;                  // over the prefix
  std::optional<std::int64_t> unit_time;   // first k with s_k = 1, if any
};

inline CriterionResult bernoulli_criterion(const XDescriptor& d, std::int64_t s0) {
  detail::require(s0 >= 2, "bernoulli_criterion: s0 must be >= 2");
  const auto s = urn_totals(s0, d.prefix);
  CriterionResult out{UrnLimit::kUndecided, urn_products(s0, d.prefix, d.prefix.size()).back(), std::nullopt};
  for (std::size_t k = 1; k < s.size(); ++k) {
    if (s[k] == 1) {
      out.unit_time = static_cast<std::int64_t>(k);
      out.verdict = UrnLimit::kBernoulli;
      return out;
    }
  }
  const std::int64_t s_end = s.back();

  if (const auto* per = std::get_if<PeriodicTail>(&d.tail)) {
    detail::require(!per->pattern.empty(), "bernoulli_criterion: empty periodic pattern");
    std::int64_t drift = 0;
    bool all_zero = true;
    std::int64_t cur = s_end;
    for (std::size_t i = 0; i < per->pattern.size(); ++i) {
      const auto x = per->pattern[i];
      detail::require_replacement(cur, x);
      cur += x;
      drift += x;
      all_zero = all_zero && x == 0;
      if (cur == 1) {
        out.unit_time = static_cast<std::int64_t>(d.prefix.size() + i + 1);
        out.verdict = UrnLimit::kBernoulli;
        return out;
      }
    }
    detail::require(drift >= 0, "bernoulli_criterion: periodic tail drives the urn empty");
    // With drift > 0 the first period holds the minimum and s grows linearly;
    // with drift 0 a non-zero pattern repeats a fixed positive term forever.
    out.verdict = drift > 0 || all_zero ? UrnLimit::kNonBernoulli : UrnLimit::kBernoulli;
    return out;
  }
  if (const auto* bnd = std::get_if<BoundedTail>(&d.tail)) {
    detail::require(bnd->max_abs >= 0 && bnd->slope > 0.0, "bernoulli_criterion: malformed bounded tail");
    // Σ (C/(a k))² converges; the floor decides s_k >= 2.
    out.verdict = bnd->floor >= 2 ? UrnLimit::kNonBernoulli : UrnLimit::kUndecided;
    return out;
  }
  return out;
}

// ---------------------------------------------------------------------------

struct UrnTrajectory {
  std::int64_t r0 = 0;
  std::int64_t b0 = 0;
  std::vector<std::int64_t> X;
  std::vector<std::int64_t> R;
  std::vector<std::int64_t> s;
  std::vector<std::uint8_t> B;  // B_1..B_k
  std::vector<double> u_exact;

  double proportion(std::size_t k) const { return static_cast<double>(R[k]) / static_cast<double>(s[k]); }
  // (1/k) Σ_{i<=k} B_i.
  double draw_frequency(std::size_t k) const {
    if (k == 0) return 0.0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < k; ++i) n += B[i];
    return static_cast<double>(n) / static_cast<double>(k);
  }
};

inline UrnTrajectory proportion_run(std::int64_t r0, std::int64_t b0, std::span<const std::int64_t> X,
                                    RngStream& rng, bool with_moments = false) {
  detail::require_urn_start(r0, b0);
  UrnTrajectory t;
  t.r0 = r0;
  t.b0 = b0;
  t.X.assign(X.begin(), X.end());
  t.R.reserve(X.size() + 1);
  t.s.reserve(X.size() + 1);
  t.B.reserve(X.size());
  UrnState st{r0, r0 + b0};
  t.R.push_back(st.R);
  t.s.push_back(st.s);
  for (auto x : X) {
    bool red = false;
    st = urn_step(st, x, rng, &red);
    t.R.push_back(st.R);
    t.s.push_back(st.s);
    t.B.push_back(red);
  }
  if (with_moments) t.u_exact = moment_recursion(r0, b0, X, X.size());
  return t;
}

}  // namespace sirtree

#endif  // SIRTREE_POLYA_HPP_
