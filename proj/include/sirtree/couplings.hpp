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

// Bienaymé trees with geometric offspring, their height tail, and the
// three-forest sandwich coupling of a freezing forest between two of them.
//
// Throughout, G(s) is the law P(k) = s (1-s)^k on k >= 0: s is the freezing
// probability of a vertex, 1/s - 1 its mean number of children.

#ifndef SIRTREE_COUPLINGS_HPP_
#define SIRTREE_COUPLINGS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sirtree/errors.hpp"
#include "sirtree/freezetree.hpp"
#include "sirtree/rng.hpp"

namespace sirtree {

struct GeomOffspring {
  double s;

  explicit GeomOffspring(double success) : s(success) {
    detail::require_domain(s > 0.0 && s <= 1.0, "GeomOffspring: s must lie in (0, 1]");
  }
  double mean() const { return 1.0 / s - 1.0; }
  bool subcritical() const { return s > 0.5; }
  double pmf(std::int64_t k) const { return k < 0 ? 0.0 : s * std::pow(1.0 - s, static_cast<double>(k)); }

  // Inverse CDF: floor(log(1-U) / log(1-s)).
  std::int64_t sample(RngStream& rng) const {
    if (s >= 1.0) return 0;
    const double u = rng.uniform();
    return static_cast<std::int64_t>(std::floor(std::log1p(-u) / std::log1p(-s)));
  }
};

inline constexpr std::size_t kDefaultNodeCap = 10'000'000;

// Breadth-first Galton-Watson tree. Every vertex ends frozen; its children
// are attached before it freezes, so birth steps follow BFS order.
inline Tree sample_bienayme(double s, RngStream& rng, std::size_t node_cap = kDefaultNodeCap) {
  const GeomOffspring law(s);
  Tree tree(1);
  for (std::size_t v = 0; v < tree.node_count(); ++v) {
    const auto id = static_cast<Tree::Index>(v);
    const std::int64_t k = law.sample(rng);
    if (tree.node_count() + static_cast<std::size_t>(k) > node_cap) {
      throw CapacityError("sample_bienayme: node cap " + std::to_string(node_cap) + " exceeded");
    }
    for (std::int64_t c = 0; c < k; ++c) tree.apply(id, 1);
    tree.apply(id, -1);
  }
  return tree;
}

// Height of one G(s) tree, generation by generation (no tree is stored).
inline std::int64_t sample_bienayme_height(double s, RngStream& rng,
                                           std::size_t node_cap = kDefaultNodeCap) {
  const GeomOffspring law(s);
  std::int64_t generation = 1;
  std::int64_t height = -1;
  std::size_t total = 1;
  while (generation > 0) {
    ++height;
    std::int64_t next = 0;
    for (std::int64_t i = 0; i < generation; ++i) next += law.sample(rng);
    total += static_cast<std::size_t>(next);
    if (total > node_cap) throw CapacityError("sample_bienayme_height: node cap exceeded");
    generation = next;
  }
  return height;
}

// Closed form (1 - s0) m^n / (m^n - s0) with m = 1/r - 1, s0 = r/(1-r).
// Against the pgf recursion this equals P(Height >= n); see harris_dp_tail.
inline double harris_height_tail(double r, std::int64_t n) {
  detail::require_domain(r > 0.5 && r < 1.0, "harris_height_tail: r must lie in (1/2, 1)");
  detail::require(n >= 0, "harris_height_tail: n must be non-negative");
  const double m = 1.0 / r - 1.0;
  const double s0 = r / (1.0 - r);
  const double mn = std::pow(m, static_cast<double>(n));
  return (1.0 - s0) * mn / (mn - s0);
}

// P(Height >= n) for a G(r) tree: 1 - q_{n-1} with q_0 = r and
// q_{k+1} = r / (1 - (1-r) q_k) the pgf iterate P(Height <= k+1).
inline double harris_dp_tail(double r, std::int64_t n) {
  detail::require_domain(r > 0.0 && r < 1.0, "harris_dp_tail: r must lie in (0, 1)");
  if (n <= 0) return 1.0;
  double q = r;
  for (std::int64_t k = 1; k < n; ++k) q = r / (1.0 - (1.0 - r) * q);
  return 1.0 - q;
}

// Max height over `count` independent G(s) trees.
inline std::int64_t dangling_forest_height(std::int64_t count, double s, RngStream& rng) {
  detail::require_domain(s > 0.5 && s <= 1.0, "dangling_forest_height: s must lie in (1/2, 1]");
  detail::require(count >= 1, "dangling_forest_height: count must be positive");
  std::int64_t best = 0;
  for (std::int64_t i = 0; i < count; ++i) best = std::max(best, sample_bienayme_height(s, rng));
  return best;
}

// P(max height over `count` trees <= h).
inline double forest_height_cdf(std::int64_t count, double s, std::int64_t h) {
  if (h < 0) return 0.0;
  if (s >= 1.0) return 1.0;
  return std::pow(1.0 - harris_height_tail(s, h + 1), static_cast<double>(count));
}

// ---------------------------------------------------------------------------
// Sandwich coupling.

// r_k as a function of the middle sign prefix X_1..X_{k-1}: the probability
// that step k freezes.
using FreezeProbability = std::function<double(std::span<const std::int8_t>)>;

inline FreezeProbability constant_freeze(double r) {
  return [r](std::span<const std::int8_t>) { return r; };
}

// SIR freeze probabilities 1/(1 + λ_n H) with H = H0 minus the number of
// attachments so far.
inline FreezeProbability sir_freeze(double lambda_n, std::int64_t susceptible0) {
  return [lambda_n, susceptible0](std::span<const std::int8_t> prefix) {
    std::int64_t h = susceptible0;
    for (auto x : prefix) h -= x > 0;
    return 1.0 - infection_probability(lambda_n, std::max<std::int64_t>(h, 0));
  };
}

// The three forests share one vertex arena. A vertex belongs to each forest
// independently; vertices created by the middle forest after the coupling
// breaks belong to it alone.
struct SandwichCoupling {
  enum Forest : std::uint8_t { kLower = 0, kMiddle = 1, kUpper = 2 };

  std::size_t roots = 0;
  std::vector<std::int64_t> parent;  // -1 for roots
  std::vector<std::uint32_t> height;
  std::vector<std::uint8_t> member[3];
  std::vector<std::uint8_t> active[3];

  std::vector<std::int8_t> signs;  // the middle sequence X̃
  std::vector<double> r;           // r_k used for X̃_k
  std::int64_t steps = 0;          // construction steps n
  std::optional<std::int64_t> decoupled_at;  // first n with C_n = 0
  std::int64_t middle_tau = -1;    // σ-index at which the middle dies
  bool event_E = false;            // p <= r_k <= q for every k < middle_tau
  std::int64_t inclusion_failures = 0;  // steps at which inclusions broke while coupled

  std::size_t node_count() const { return parent.size(); }

  bool in(Forest f, std::size_t v) const { return member[f][v] != 0; }
  bool active_in(Forest f, std::size_t v) const { return active[f][v] != 0; }

  // Children of v inside forest f, per vertex (zero for non-members).
  std::vector<std::int64_t> offspring(Forest f) const {
    std::vector<std::int64_t> out(node_count(), 0);
    for (std::size_t v = 0; v < node_count(); ++v) {
      if (parent[v] >= 0 && in(f, v)) ++out[static_cast<std::size_t>(parent[v])];
    }
    return out;
  }
  std::int64_t forest_size(Forest f) const {
    std::int64_t n = 0;
    for (std::size_t v = 0; v < node_count(); ++v) n += in(f, v);
    return n;
  }
  // lower ⊆ middle ⊆ upper for vertex sets and active sets.
  bool nested() const {
    for (std::size_t v = 0; v < node_count(); ++v) {
      if (in(kLower, v) && !in(kMiddle, v)) return false;
      if (in(kMiddle, v) && !in(kUpper, v)) return false;
      if (active_in(kLower, v) && !active_in(kMiddle, v)) return false;
      if (active_in(kMiddle, v) && !active_in(kUpper, v)) return false;
    }
    return true;
  }
};

// Joint construction of N lower G(q) trees, the middle freezing forest driven
// by `r_of`, and N upper G(p) trees, from one uniform U per step. While every
// r_k lies in [p, q] a single vertex drawn from the upper forest drives all
// three; once some r_k falls outside, the middle forest draws its own vertex.
inline SandwichCoupling sandwich_coupling(std::size_t roots, double p, double q,
                                          const FreezeProbability& r_of, RngStream& rng,
                                          std::int64_t max_steps = 100'000'000) {
  detail::require_domain(p > 0.5 && p <= q && q < 1.0, "sandwich_coupling: need 1/2 < p <= q < 1");
  detail::require(roots >= 1, "sandwich_coupling: need at least one root");
  using SC = SandwichCoupling;
  SC out;
  out.roots = roots;
  SwapRemoveActiveSet<std::uint32_t> upper_set;
  SwapRemoveActiveSet<std::uint32_t> middle_set;

  auto add_vertex = [&](std::int64_t par) {
    const auto id = static_cast<std::uint32_t>(out.parent.size());
    out.parent.push_back(par);
    out.height.push_back(par < 0 ? 0 : out.height[static_cast<std::size_t>(par)] + 1);
    for (int f = 0; f < 3; ++f) {
      out.member[f].push_back(0);
      out.active[f].push_back(0);
    }
    return id;
  };
  auto join = [&](SC::Forest f, std::uint32_t v) {
    out.member[f][v] = 1;
    out.active[f][v] = 1;
    if (f == SC::kUpper) upper_set.insert(v);
    if (f == SC::kMiddle) middle_set.insert(v);
  };
  auto freeze = [&](SC::Forest f, std::uint32_t v) {
    out.active[f][v] = 0;
    if (f == SC::kUpper) upper_set.erase(v);
    if (f == SC::kMiddle) middle_set.erase(v);
  };
  auto locally_nested = [&](std::uint32_t v) {
    const bool ok = (!out.member[0][v] || out.member[1][v]) && (!out.member[1][v] || out.member[2][v]) &&
                    (!out.active[0][v] || out.active[1][v]) && (!out.active[1][v] || out.active[2][v]);
    return ok;
  };

  for (std::size_t i = 0; i < roots; ++i) {
    const auto v = add_vertex(-1);
    join(SC::kLower, v);
    join(SC::kMiddle, v);
    join(SC::kUpper, v);
  }

  // r_{σ+1}, queried once per middle index.
  std::optional<double> r_next;
  auto current_r = [&] {
    if (!r_next) {
      const double v = r_of(std::span<const std::int8_t>(out.signs));
      detail::require_domain(v >= 0.0 && v <= 1.0, "sandwich_coupling: r_k outside [0, 1]");
      r_next = v;
    }
    return *r_next;
  };
  auto emit_sign = [&](double u) {
    const double rk = current_r();
    const std::int8_t x = u >= rk ? std::int8_t{1} : std::int8_t{-1};
    out.signs.push_back(x);
    out.r.push_back(rk);
    r_next.reset();
    return x;
  };

  bool coupled = true;
  while (upper_set.size() > 0 || middle_set.size() > 0) {
    if (out.steps >= max_steps) throw CapacityError("sandwich_coupling: step cap exceeded");
    const double u = rng.uniform();
    const double rk = current_r();
    if (coupled && !(rk >= p && rk <= q)) {
      coupled = false;
      out.decoupled_at = out.steps;
    }
    std::optional<std::uint32_t> touched_v;
    std::optional<std::uint32_t> child;

    if (upper_set.size() > 0) {
      const std::uint32_t v = upper_set.at(rng.index(upper_set.size()));
      touched_v = v;
      const bool lower_live = out.active[SC::kLower][v] != 0;
      const bool middle_live = coupled && out.active[SC::kMiddle][v] != 0;
      if (u < p) {
        freeze(SC::kUpper, v);
      } else {
        child = add_vertex(v);
        join(SC::kUpper, *child);
      }
      if (lower_live) {
        if (u < q) {
          freeze(SC::kLower, v);
        } else {
          join(SC::kLower, *child);  // u >= q >= p, so the upper forest attached
        }
      }
      if (middle_live) {
        if (emit_sign(u) < 0) {
          freeze(SC::kMiddle, v);
        } else {
          join(SC::kMiddle, *child);  // u >= r_k >= p
        }
      }
    } else if (coupled) {
      emit_sign(u);  // every forest is dead; the sequence runs on alone
    }

    if (!coupled) {
      if (middle_set.size() == 0) {
        emit_sign(u);
      } else {
        const std::uint32_t w = middle_set.at(rng.index(middle_set.size()));
        if (emit_sign(u) < 0) {
          freeze(SC::kMiddle, w);
        } else {
          join(SC::kMiddle, add_vertex(w));
        }
      }
    }

    if (coupled) {
      if (touched_v && !locally_nested(*touched_v)) ++out.inclusion_failures;
      if (child && !locally_nested(*child)) ++out.inclusion_failures;
    }
    ++out.steps;
    if (out.middle_tau < 0 && middle_set.size() == 0) {
      out.middle_tau = static_cast<std::int64_t>(out.signs.size());
    }
  }

  out.event_E = true;
  for (std::int64_t k = 0; k + 1 < out.middle_tau; ++k) {
    const double rk = out.r[static_cast<std::size_t>(k)];
    if (!(rk >= p && rk <= q)) out.event_E = false;
  }
  return out;
}

// Root offspring counts of forest f (one i.i.d. G(·) sample per root).
inline std::vector<std::int64_t> root_offspring(const SandwichCoupling& sc, SandwichCoupling::Forest f) {
  const auto all = sc.offspring(f);
  return {all.begin(), all.begin() + static_cast<std::ptrdiff_t>(sc.roots)};
}

}  // namespace sirtree

#endif  // SIRTREE_COUPLINGS_HPP_
