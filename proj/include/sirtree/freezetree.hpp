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

// Uniform attachment with freezing. Starting from r active roots, each step
// picks a uniformly random active vertex and either freezes it (sign -1) or
// attaches a new active child to it (sign +1). Driven by the sign sequence of
// the SIR chain with r = 1 this is the infection tree.

#ifndef SIRTREE_FREEZETREE_HPP_
#define SIRTREE_FREEZETREE_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "sirtree/errors.hpp"
#include "sirtree/rng.hpp"
#include "sirtree/theory.hpp"
#include "sirtree/walks.hpp"

namespace sirtree {

using Complex = std::complex<double>;

enum class NodeState : std::uint8_t { kActive, kFrozen };

// Active-set backend with O(1) sampling and removal. Removal swaps the last
// element in, so the enumeration order is not the order of appearance.
template <class Index>
class SwapRemoveActiveSet {
 public:
  using index_type = Index;
  static constexpr Index npos = std::numeric_limits<Index>::max();

  void reserve(std::size_t n) {
    items_.reserve(n);
    pos_.reserve(n);
  }
  void insert(Index v) {
    if (pos_.size() <= v) pos_.resize(static_cast<std::size_t>(v) + 1, npos);
    pos_[v] = static_cast<Index>(items_.size());
    items_.push_back(v);
  }
  void erase(Index v) {
    const Index p = pos_[v];
    const Index last = items_.back();
    items_[p] = last;
    pos_[last] = p;
    items_.pop_back();
    pos_[v] = npos;
  }
  Index at(std::size_t i) const { return items_[i]; }
  std::size_t size() const { return items_.size(); }
  template <class F>
  void for_each(F&& f) const {
    for (Index v : items_) f(v);
  }

 private:
  std::vector<Index> items_;
  std::vector<Index> pos_;
};

// Active-set backend that enumerates active vertices in order of appearance.
// Frozen vertices stay as tombstones; a Fenwick tree over the alive flags
// gives O(log n) selection of the i-th alive vertex.
template <class Index>
class OrderedActiveSet {
 public:
  using index_type = Index;

  void reserve(std::size_t n) {
    alive_.reserve(n);
    fenwick_.reserve(n + 1);
  }
  // Vertices must be inserted in increasing id order (ids are arena indices).
  void insert(Index v) {
    while (alive_.size() <= v) push_slot();
    if (!alive_[v]) {
      alive_[v] = 1;
      add(static_cast<std::size_t>(v) + 1, 1);
      ++count_;
    }
  }
  void erase(Index v) {
    if (alive_[v]) {
      alive_[v] = 0;
      add(static_cast<std::size_t>(v) + 1, -1);
      --count_;
    }
  }
  // i-th alive vertex (0-based) in increasing id order.
  Index at(std::size_t i) const {
    std::size_t pos = 0;
    auto remaining = static_cast<std::int64_t>(i) + 1;
    std::size_t step = 1;
    while (step * 2 <= alive_.size()) step *= 2;
    for (; step > 0; step /= 2) {
      const std::size_t next = pos + step;
      if (next <= alive_.size() && fenwick_[next] < remaining) {
        pos = next;
        remaining -= fenwick_[next];
      }
    }
    return static_cast<Index>(pos);
  }
  std::size_t size() const { return count_; }
  template <class F>
  void for_each(F&& f) const {
    for (std::size_t v = 0; v < alive_.size(); ++v)
      if (alive_[v]) f(static_cast<Index>(v));
  }

 private:
  void push_slot() {
    // New Fenwick cell i covers (i - lowbit(i), i]; all of those slots except
    // i itself are already present.
    alive_.push_back(0);
    const std::size_t i = alive_.size();
    const std::size_t low = i & (~i + 1);
    fenwick_.resize(i + 1, 0);
    fenwick_[i] = prefix(i - 1) - prefix(i - low);
  }
  std::int64_t prefix(std::size_t i) const {
    std::int64_t s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += fenwick_[i];
    return s;
  }
  void add(std::size_t i, std::int64_t d) {
    for (; i < fenwick_.size(); i += i & (~i + 1)) fenwick_[i] += d;
  }

  std::vector<std::uint8_t> alive_;
  std::vector<std::int64_t> fenwick_{0};
  std::size_t count_ = 0;
};

template <class Index>
struct StepRecord {
  std::optional<Index> vertex;  // empty for a no-op step
  int sign = 0;
  std::optional<Index> child;  // new vertex on an attachment
};

// Arena-backed forest grown by uniform attachment with freezing. Heights and
// the active profile are maintained incrementally.
template <class ActiveSet = SwapRemoveActiveSet<std::uint32_t>>
class FreezeTree {
 public:
  using Index = typename ActiveSet::index_type;
  static constexpr Index kNoParent = std::numeric_limits<Index>::max();

  explicit FreezeTree(std::size_t roots = 1, std::size_t reserve_nodes = 0) : roots_(roots) {
    detail::require(roots >= 1, "FreezeTree: need at least one root");
    reserve(std::max(reserve_nodes, roots));
    for (std::size_t r = 0; r < roots; ++r) add_node(kNoParent, 0);
  }

  void reserve(std::size_t n) {
    parent_.reserve(n);
    height_.reserve(n);
    state_.reserve(n);
    birth_.reserve(n);
    active_.reserve(n);
  }

  std::size_t node_count() const { return parent_.size(); }
  std::size_t active_count() const { return active_.size(); }
  std::size_t frozen_count() const { return node_count() - active_count(); }
  std::size_t root_count() const { return roots_; }
  std::int64_t steps_applied() const { return steps_; }
  // Max height over all vertices, active or frozen.
  std::uint32_t height() const { return max_height_; }

  Index parent(Index v) const { return parent_[v]; }
  std::uint32_t height_of(Index v) const { return height_[v]; }
  NodeState state(Index v) const { return state_[v]; }
  bool is_active(Index v) const { return state_[v] == NodeState::kActive; }
  std::uint32_t birth_step(Index v) const { return birth_[v]; }

  // Active vertices per height; index h holds A(h).
  std::span<const std::int64_t> active_by_height() const { return active_by_height_; }

  // The i-th active vertex in the backend's enumeration.
  Index nth_active(std::size_t i) const { return active_.at(i); }

  template <class F>
  void for_each_active(F&& f) const {
    active_.for_each(std::forward<F>(f));
  }

  // Applies one step to a given active vertex.
  StepRecord<Index> apply(Index v, int sign) {
    detail::require(sign == 1 || sign == -1, "FreezeTree::apply: sign must be ±1");
    detail::require(v < node_count() && is_active(v), "FreezeTree::apply: vertex is not active");
    ++steps_;
    StepRecord<Index> rec{v, sign, std::nullopt};
    if (sign < 0) {
      state_[v] = NodeState::kFrozen;
      active_.erase(v);
      --active_by_height_[height_[v]];
    } else {
      rec.child = add_node(v, height_[v] + 1);
    }
    return rec;
  }

  // One step of the growth rule: with no active vertex the step is a no-op,
  // otherwise the vertex is floor(U * #active) in the backend's enumeration.
  StepRecord<Index> grow_step(int sign, RngStream& choice) {
    if (active_count() == 0) {
      detail::require(sign == 1 || sign == -1, "grow_step: sign must be ±1");
      ++steps_;
      return StepRecord<Index>{std::nullopt, sign, std::nullopt};
    }
    return apply(nth_active(choice.index(active_count())), sign);
  }

 private:
  Index add_node(Index parent, std::uint32_t h) {
    const auto id = static_cast<Index>(parent_.size());
    detail::require(parent_.size() < static_cast<std::size_t>(kNoParent),
                    "FreezeTree: node index overflow, use a wider Index");
    parent_.push_back(parent);
    height_.push_back(h);
    state_.push_back(NodeState::kActive);
    birth_.push_back(static_cast<std::uint32_t>(steps_));
    active_.insert(id);
    if (active_by_height_.size() <= h) active_by_height_.resize(h + 1, 0);
    ++active_by_height_[h];
    max_height_ = std::max(max_height_, h);
    return id;
  }

  std::size_t roots_;
  std::int64_t steps_ = 0;
  std::uint32_t max_height_ = 0;
  std::vector<Index> parent_;
  std::vector<std::uint32_t> height_;
  std::vector<NodeState> state_;
  std::vector<std::uint32_t> birth_;
  std::vector<std::int64_t> active_by_height_;
  ActiveSet active_;
};

using Tree = FreezeTree<>;
using OrderedTree = FreezeTree<OrderedActiveSet<std::uint32_t>>;
using WideTree = FreezeTree<SwapRemoveActiveSet<std::uint64_t>>;

template <class Tr = Tree>
Tr build_from_signs(std::span<const std::int8_t> signs, std::size_t roots, RngStream& choice) {
  Tr tree(roots, roots + signs.size());
  for (auto x : signs) tree.grow_step(x, choice);
  return tree;
}

template <class Tr>
std::uint32_t height(const Tr& tree) {
  return tree.height();
}

// Height -> number of active vertices.
struct Profile {
  std::vector<std::int64_t> counts;

  std::int64_t at(std::int64_t h) const {
    return h >= 0 && h < static_cast<std::int64_t>(counts.size()) ? counts[static_cast<std::size_t>(h)] : 0;
  }
  std::int64_t total() const {
    std::int64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }
  // A([a, b]); b = nullopt means b = ∞.
  std::int64_t range(std::int64_t a, std::optional<std::int64_t> b = std::nullopt) const {
    const std::int64_t hi = b ? std::min<std::int64_t>(*b, max_height()) : max_height();
    std::int64_t s = 0;
    for (std::int64_t h = std::max<std::int64_t>(a, 0); h <= hi; ++h) s += counts[static_cast<std::size_t>(h)];
    return s;
  }
  // Sum over integer heights inside the real interval [lo, hi].
  std::int64_t band(double lo, double hi) const {
    const auto a = static_cast<std::int64_t>(std::ceil(lo));
    if (std::isinf(hi)) return range(a);
    return range(a, static_cast<std::int64_t>(std::floor(hi)));
  }
  std::int64_t max_height() const { return static_cast<std::int64_t>(counts.size()) - 1; }
};

template <class Tr>
Profile active_profile(const Tr& tree) {
  auto c = tree.active_by_height();
  Profile p{std::vector<std::int64_t>(c.begin(), c.end())};
  while (p.counts.size() > 1 && p.counts.back() == 0) p.counts.pop_back();
  return p;
}

namespace detail {
template <class Tr>
void require_active(const Tr& tree, const char* who) {
  if (tree.active_count() == 0) {
    throw PreconditionError(std::string(who) + ": no active vertices, 1/#active is undefined");
  }
}

// Σ_h A(h) e^{zh}.
inline Complex profile_sum(std::span<const std::int64_t> counts, Complex z) {
  Complex sum = 0.0;
  const Complex ez = std::exp(z);
  Complex pw = 1.0;
  for (auto c : counts) {
    if (c != 0) sum += static_cast<double>(c) * pw;
    pw *= ez;
  }
  return sum;
}
}  // namespace detail

// L(z, T) = (1/#active) Σ_{active u} e^{z height(u)}.
template <class Tr>
Complex laplace_transform(const Tr& tree, Complex z) {
  detail::require_active(tree, "laplace_transform");
  return detail::profile_sum(tree.active_by_height(), z) / static_cast<double>(tree.active_count());
}

struct OneStepCheck {
  Complex lhs;
  Complex rhs;
  double residual;
};

// Conditional expectation of L after one step with the given sign, computed
// by averaging L over every possible choice of active vertex (lhs), against
// L(z,T)(1 + (e^z - 1) 1{sign = +1} / s') with s' the new active count (rhs).
template <class Tr>
OneStepCheck one_step_expectation_check(const Tr& tree, int sign, Complex z) {
  detail::require_active(tree, "one_step_expectation_check");
  detail::require(sign == 1 || sign == -1, "one_step_expectation_check: sign must be ±1");
  const auto s = static_cast<double>(tree.active_count());
  const double s_next = s + sign;
  detail::require(s_next >= 1.0, "one_step_expectation_check: step would leave no active vertex");

  const auto counts = tree.active_by_height();
  const Complex base = detail::profile_sum(counts, z);
  const Complex ez = std::exp(z);
  std::vector<Complex> pw(counts.size(), 1.0);
  for (std::size_t h = 1; h < pw.size(); ++h) pw[h] = pw[h - 1] * ez;
  Complex acc = 0.0;
  tree.for_each_active([&](auto v) {
    const Complex at_v = pw[tree.height_of(v)];
    const Complex after = sign > 0 ? base + at_v * ez : base - at_v;
    acc += after / s_next;
  });
  const Complex lhs = acc / s;
  const Complex rhs = (base / s) * (1.0 + (sign > 0 ? (ez - 1.0) / s_next : Complex(0.0)));
  return {lhs, rhs, std::abs(lhs - rhs)};
}

// k-th Fourier coefficient of u -> L(h + iu, T) e^{-k(h+iu)}, i.e. the
// normalised profile A(k)/#active. Evaluated by an M-point rectangle rule on
// [-π, π) with M > max height + 1, which is exact for this trig polynomial.
// Away from h = 0 the terms e^{(j-k)h} cancel across nodes, so the sum is
// carried in long double with e^{-kz} folded into each height term.
template <class Tr>
double fourier_invert(const Tr& tree, double h, std::int64_t k) {
  detail::require_active(tree, "fourier_invert");
  using Wide = std::complex<long double>;
  const auto counts = tree.active_by_height();
  const auto m = static_cast<std::int64_t>(counts.size()) + 2;
  const long double pi = std::numbers::pi_v<long double>;
  Wide acc = 0.0L;
  for (std::int64_t j = 0; j < m; ++j) {
    const long double u = -pi + 2.0L * pi * static_cast<long double>(j) / static_cast<long double>(m);
    for (std::size_t d = 0; d < counts.size(); ++d) {
      if (counts[d] == 0) continue;
      const long double e = static_cast<long double>(d) - static_cast<long double>(k);
      acc += static_cast<long double>(counts[d]) * std::exp(Wide(e * h, e * u));
    }
  }
  const long double s = static_cast<long double>(tree.active_count());
  return static_cast<double>((acc / (static_cast<long double>(m) * s)).real());
}

// ---------------------------------------------------------------------------
// The normalised Laplace transform divided by its conditional mean.

// M_k(z) = L(z, T_k) / C_k(z) for k in [J, K], with
// C_k(z) = Π_{i=J+1..k} (1 + (e^z - 1) 1{X_i = +1} / S_i).
struct MartingalePath {
  std::int64_t J = 0;
  std::int64_t last = 0;            // K = floor(n t)
  std::vector<Complex> C;           // C_J..C_K
  std::vector<Complex> L;           // L(z, T_J)..L(z, T_K)
  std::vector<Complex> M;           // M_J..M_K
  double min_factor_modulus = 1.0;  // min |factor| over i in (J, K]

  // nullopt for k < J: the product is not defined there.
  std::optional<Complex> at(std::int64_t k) const {
    if (k < J || k > last) return std::nullopt;
    return M[static_cast<std::size_t>(k - J)];
  }
};

// Replays a freezing tree along `signs` (with walk `walk`, S_0 = 1) using the
// `choice` stream and records M_k(z) for k in [J, floor(n t)]. Requires the
// walk to stay positive up to floor(n t) and Re z < 2 z_λ.
template <class Tr = Tree>
MartingalePath martingale_sequence(std::span<const std::int8_t> signs, std::span<const std::int64_t> walk,
                                   std::int64_t n, double lambda, Complex z, double t, RngStream& choice) {
  detail::require_domain(z.real() < 2.0 * z_lambda(lambda), "martingale_sequence: Re z must be < 2 z_λ");
  const auto last = static_cast<std::int64_t>(std::floor(static_cast<double>(n) * t));
  detail::require(last < static_cast<std::int64_t>(walk.size()) &&
                      last <= static_cast<std::int64_t>(signs.size()),
                  "martingale_sequence: trace shorter than floor(n t)");
  const auto J = compute_J(walk, lambda, last);
  detail::require(J.has_value(), "martingale_sequence: no survival up to floor(n t)");

  MartingalePath out;
  out.J = *J;
  out.last = last;
  const Complex ez1 = std::exp(z) - 1.0;
  Tr tree(1, static_cast<std::size_t>(last) + 1);
  Complex c = 1.0;
  for (std::int64_t k = 0; k <= last; ++k) {
    if (k > 0) {
      const std::int8_t x = signs[static_cast<std::size_t>(k - 1)];
      tree.grow_step(x, choice);
      if (k > out.J && x > 0) {
        const Complex factor = 1.0 + ez1 / static_cast<double>(walk[static_cast<std::size_t>(k)]);
        out.min_factor_modulus = std::min(out.min_factor_modulus, std::abs(factor));
        c *= factor;
      }
    }
    if (k >= out.J) {
      const Complex lt = laplace_transform(tree, z);
      out.C.push_back(c);
      out.L.push_back(lt);
      out.M.push_back(lt / c);
    }
  }
  return out;
}

// Vertex export: node,parent,height,birth_step,state (parent -1 for roots).
template <class Tr>
void write_vertex_csv(const Tr& tree, std::ostream& os) {
  os << "node,parent,height,birth_step,state\n";
  for (std::size_t v = 0; v < tree.node_count(); ++v) {
    const auto id = static_cast<typename Tr::Index>(v);
    const auto p = tree.parent(id);
    os << v << ',';
    if (p == Tr::kNoParent) {
      os << -1;
    } else {
      os << static_cast<std::uint64_t>(p);
    }
    os << ',' << tree.height_of(id) << ',' << tree.birth_step(id) << ','
       << (tree.is_active(id) ? "active" : "frozen") << '\n';
  }
}

}  // namespace sirtree

#endif  // SIRTREE_FREEZETREE_HPP_
