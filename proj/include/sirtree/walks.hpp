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

// The embedded jump chain of the SIR epidemic on the complete graph, the
// three shared-uniform walks that sandwich it, and walk statistics.

#ifndef SIRTREE_WALKS_HPP_
#define SIRTREE_WALKS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sirtree/errors.hpp"
#include "sirtree/rng.hpp"
#include "sirtree/theory.hpp"

namespace sirtree {

using Walk = std::vector<std::int64_t>;

// One realised run of the (H, I) chain started from (n, 1).
struct InfectionTrace {
  std::int64_t n = 0;
  double lambda_n = 0.0;
  std::vector<std::int8_t> steps;  // X_1..X_tau, each ±1
  Walk walk;                       // S_0..S_tau, S_0 = 1 (infectious count)
  Walk susceptibles;               // H_0..H_tau, H_0 = n
  std::int64_t tau = 0;            // absorption step, or the horizon
  bool absorbed = false;

  std::int64_t length() const { return static_cast<std::int64_t>(steps.size()); }
};

// Infection probability λ_n H / (1 + λ_n H). Shared by every construction so
// that walks driven by the same uniform agree bit for bit.
inline double infection_probability(double lambda_n, std::int64_t susceptible) {
  const double a = lambda_n * static_cast<double>(susceptible);
  return a / (1.0 + a);
}

inline std::int8_t sign_from_uniform(double u, double p_infect) {
  return u <= p_infect && p_infect > 0.0 ? std::int8_t{1} : std::int8_t{-1};
}

inline std::int64_t default_horizon(std::int64_t n) { return 2 * n + 2; }

// Runs the chain until absorption or `horizon` steps. Consumes exactly one
// uniform per step, in step order.
inline InfectionTrace simulate_sir(std::int64_t n, double lambda_n, std::int64_t horizon,
                                   RngStream& rng) {
  detail::require(n >= 0, "simulate_sir: n must be non-negative");
  detail::require_domain(lambda_n > 0.0, "simulate_sir: λ_n must be positive");
  detail::require(horizon >= 0, "simulate_sir: negative horizon");
  InfectionTrace tr;
  tr.n = n;
  tr.lambda_n = lambda_n;
  const auto cap = static_cast<std::size_t>(std::min(horizon, 2 * n + 1));
  tr.steps.reserve(cap);
  tr.walk.reserve(cap + 1);
  tr.susceptibles.reserve(cap + 1);
  std::int64_t s = 1;
  std::int64_t h = n;
  tr.walk.push_back(s);
  tr.susceptibles.push_back(h);
  std::int64_t k = 0;
  while (s > 0 && k < horizon) {
    const std::int8_t x = sign_from_uniform(rng.uniform(), infection_probability(lambda_n, h));
    if (x > 0) --h;
    s += x;
    ++k;
    tr.steps.push_back(x);
    tr.walk.push_back(s);
    tr.susceptibles.push_back(h);
  }
  tr.absorbed = s == 0;
  tr.tau = k;
  return tr;
}

// Walk S_0 = start, S_k = start + X_1 + ... + X_k.
inline Walk walk_from_signs(std::span<const std::int8_t> signs, std::int64_t start = 1) {
  Walk w;
  w.reserve(signs.size() + 1);
  w.push_back(start);
  for (auto x : signs) w.push_back(w.back() + x);
  return w;
}

// ---------------------------------------------------------------------------
// Shared-uniform coupling of the limit walk S (drift (λ-1)/(λ+1)), the
// epidemic walk S^n and the lower walk driven by 1 - k/n:
//   lower(k) <= Sn(k) <= S(k) for every k.

struct CoupledWalks {
  std::int64_t n = 0;
  double lambda = 0.0;
  std::int64_t horizon = 0;
  std::vector<double> uniforms;  // U_1..U_horizon
  Walk S;
  Walk Sn;
  Walk Sn_lower;
  std::vector<std::int8_t> Xn;  // signs of Sn

  bool ordered() const {
    for (std::size_t k = 0; k < S.size(); ++k) {
      if (!(Sn_lower[k] <= Sn[k] && Sn[k] <= S[k])) return false;
    }
    return true;
  }

  // Absorption time of Sn (first k with Sn_k = 0), if reached.
  std::optional<std::int64_t> epidemic_tau() const {
    for (std::size_t k = 0; k < Sn.size(); ++k)
      if (Sn[k] == 0) return static_cast<std::int64_t>(k);
    return std::nullopt;
  }

  // First step k >= 1 at which S and Sn take different steps.
  std::optional<std::int64_t> first_disagreement() const {
    for (std::size_t k = 1; k < S.size(); ++k)
      if (S[k] - S[k - 1] != Sn[k] - Sn[k - 1]) return static_cast<std::int64_t>(k);
    return std::nullopt;
  }
};

// Builds the three walks from recorded uniforms. The lower walk steps down
// deterministically once k > n.
inline CoupledWalks coupled_walks_from(std::int64_t n, double lambda,
                                       std::vector<double> uniforms) {
  detail::require_domain(lambda > 1.0, "coupled_walks: λ must exceed 1");
  detail::require(n >= 1, "coupled_walks: n must be positive");
  CoupledWalks cw;
  cw.n = n;
  cw.lambda = lambda;
  cw.horizon = static_cast<std::int64_t>(uniforms.size());
  cw.uniforms = std::move(uniforms);
  const double lambda_n = lambda / static_cast<double>(n);
  const double p_limit = lambda / (1.0 + lambda);
  cw.S.assign(1, 1);
  cw.Sn.assign(1, 1);
  cw.Sn_lower.assign(1, 1);
  cw.Xn.reserve(cw.uniforms.size());
  std::int64_t infected = 0;
  for (std::int64_t k = 0; k < cw.horizon; ++k) {
    const double u = cw.uniforms[static_cast<std::size_t>(k)];
    const std::int8_t x = sign_from_uniform(u, p_limit);
    const std::int8_t xn = sign_from_uniform(u, infection_probability(lambda_n, n - infected));
    const std::int8_t xl =
        k <= n ? sign_from_uniform(u, infection_probability(lambda_n, n - k)) : std::int8_t{-1};
    if (xn > 0) ++infected;
    cw.S.push_back(cw.S.back() + x);
    cw.Sn.push_back(cw.Sn.back() + xn);
    cw.Sn_lower.push_back(cw.Sn_lower.back() + xl);
    cw.Xn.push_back(xn);
  }
  return cw;
}

inline CoupledWalks coupled_walks(std::int64_t n, double lambda, std::int64_t horizon,
                                  RngStream& rng) {
  std::vector<double> u(static_cast<std::size_t>(std::max<std::int64_t>(horizon, 0)));
  for (auto& v : u) v = rng.uniform();
  return coupled_walks_from(n, lambda, std::move(u));
}

// ---------------------------------------------------------------------------
// Fluid limit comparison.

// Precomputed limit curve 2 - 2g_λ(k/n) - k/n for k = 0..floor(n t_max).
class FluidCurve {
 public:
  FluidCurve(std::int64_t n, double lambda, double t_max)
      : n_(n), lambda_(lambda), t_max_(t_max) {
    detail::require_domain(t_max > 0.0 && t_max < t_lambda(lambda),
                           "fluid curve: t_max must lie in (0, t_λ)");
    const auto kmax = static_cast<std::int64_t>(std::floor(static_cast<double>(n) * t_max));
    values_.resize(static_cast<std::size_t>(kmax + 1));
    for (std::int64_t k = 0; k <= kmax; ++k) {
      values_[static_cast<std::size_t>(k)] =
          fluid_curve(lambda, static_cast<double>(k) / static_cast<double>(n));
    }
  }

  std::int64_t n() const { return n_; }
  double lambda() const { return lambda_; }
  double t_max() const { return t_max_; }
  std::int64_t last_step() const { return static_cast<std::int64_t>(values_.size()) - 1; }
  double operator[](std::int64_t k) const { return values_[static_cast<std::size_t>(k)]; }

 private:
  std::int64_t n_;
  double lambda_;
  double t_max_;
  std::vector<double> values_;
};

// sup_k |S_k/n - curve(k/n)| over k <= n t_max, or nullopt ("died out") when
// the run is absorbed by step n t_max.
inline std::optional<double> fluid_deviation(const InfectionTrace& trace, const FluidCurve& curve) {
  detail::require(trace.n == curve.n(), "fluid_deviation: curve built for a different n");
  const std::int64_t kmax = curve.last_step();
  if (trace.absorbed && static_cast<double>(trace.tau) <= static_cast<double>(trace.n) * curve.t_max())
    return std::nullopt;
  if (trace.length() < kmax) return std::nullopt;
  const double inv_n = 1.0 / static_cast<double>(trace.n);
  double worst = 0.0;
  for (std::int64_t k = 0; k <= kmax; ++k) {
    const double d = std::abs(static_cast<double>(trace.walk[static_cast<std::size_t>(k)]) * inv_n - curve[k]);
    worst = std::max(worst, d);
  }
  return worst;
}

inline std::optional<double> fluid_deviation(const InfectionTrace& trace, double lambda,
                                             double t_max) {
  return fluid_deviation(trace, FluidCurve(trace.n, lambda, t_max));
}

// True iff tau >= floor(n t).
inline bool survival(const InfectionTrace& trace, double t) {
  detail::require(t >= 0.0, "survival: negative time");
  const auto k = static_cast<std::int64_t>(std::floor(static_cast<double>(trace.n) * t));
  return trace.tau >= k;
}

// Threshold e^{2 z_λ} + 1 defining J: a step j is "small" when
// (e^{2 z_λ} + 1) / S_j >= 1/2.
inline double j_threshold(double lambda) { return std::exp(2.0 * z_lambda(lambda)) + 1.0; }

// J = sup{ j <= horizon : (e^{2z_λ}+1)/S_j >= 1/2 }, horizon + 1 if that set is
// empty. nullopt when the walk is not positive on [0, horizon].
inline std::optional<std::int64_t> compute_J(std::span<const std::int64_t> walk, double lambda,
                                             std::int64_t horizon) {
  detail::require(horizon >= 0 && horizon < static_cast<std::int64_t>(walk.size()),
                  "compute_J: horizon beyond the walk");
  for (std::int64_t j = 0; j <= horizon; ++j)
    if (walk[static_cast<std::size_t>(j)] <= 0) return std::nullopt;
  const double thr = j_threshold(lambda);
  for (std::int64_t j = horizon; j >= 0; --j) {
    if (thr / static_cast<double>(walk[static_cast<std::size_t>(j)]) >= 0.5) return j;
  }
  return horizon + 1;
}

// sup over i <= horizon with S_i > 0 of i / S_i.
inline double sup_ratio_statistic(std::span<const std::int64_t> walk, std::int64_t horizon) {
  const auto last = std::min<std::int64_t>(horizon, static_cast<std::int64_t>(walk.size()) - 1);
  double best = 0.0;
  for (std::int64_t i = 0; i <= last; ++i) {
    const auto s = walk[static_cast<std::size_t>(i)];
    if (s > 0) best = std::max(best, static_cast<double>(i) / static_cast<double>(s));
  }
  return best;
}

}  // namespace sirtree

#endif  // SIRTREE_WALKS_HPP_
