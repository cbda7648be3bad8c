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


#include "sirtree/freezetree.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <set>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "sirtree/walks.hpp"

namespace sirtree {
namespace {

// Random ±1 sequence whose walk from `roots` stays positive.
std::vector<std::int8_t> positive_signs(std::size_t len, double up, RngStream& rng, std::int64_t roots = 1) {
  std::vector<std::int8_t> x;
  std::int64_t s = roots;
  while (x.size() < len) {
    const std::int8_t step = (rng.uniform() < up || s == 1) ? 1 : -1;
    s += step;
    x.push_back(step);
  }
  return x;
}

template <class Tr>
Complex brute_laplace(const Tr& tree, Complex z) {
  Complex sum = 0.0;
  std::size_t n = 0;
  tree.for_each_active([&](auto v) {
    sum += std::exp(z * static_cast<double>(tree.height_of(v)));
    ++n;
  });
  return sum / static_cast<double>(n);
}

TEST(FreezeTree, StartsWithActiveRoots) {
  Tree t(3);
  EXPECT_EQ(t.node_count(), 3u);
  EXPECT_EQ(t.active_count(), 3u);
  EXPECT_EQ(t.height(), 0u);
  EXPECT_EQ(t.parent(0), Tree::kNoParent);
}

TEST(FreezeTree, GrowthFollowsTheWalk) {
  RngStream signs(21);
  RngStream choice(22);
  const auto x = positive_signs(5000, 0.55, signs);
  const auto walk = walk_from_signs(x);
  Tree t(1);
  std::int64_t ups = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const auto rec = t.grow_step(x[k], choice);
    ASSERT_TRUE(rec.vertex.has_value());
    EXPECT_EQ(rec.child.has_value(), x[k] > 0);
    ups += x[k] > 0;
    ASSERT_EQ(static_cast<std::int64_t>(t.active_count()), walk[k + 1]);
  }
  EXPECT_EQ(static_cast<std::int64_t>(t.node_count()), 1 + ups);
  std::uint32_t hmax = 0;
  for (std::uint32_t v = 1; v < t.node_count(); ++v) {
    EXPECT_EQ(t.height_of(v), t.height_of(t.parent(v)) + 1);
    EXPECT_LT(t.parent(v), v);
    EXPECT_GE(t.birth_step(v), t.birth_step(t.parent(v)));
    hmax = std::max(hmax, t.height_of(v));
  }
  EXPECT_EQ(t.height(), hmax);
  EXPECT_EQ(height(t), hmax);
  EXPECT_EQ(t.steps_applied(), 5000);
}

TEST(FreezeTree, StepOnEmptyTreeIsRecordedNoOp) {
  Tree t(1);
  RngStream c(1);
  t.grow_step(-1, c);
  const auto rec = t.grow_step(1, c);
  EXPECT_FALSE(rec.vertex.has_value());
  EXPECT_FALSE(rec.child.has_value());
  EXPECT_EQ(t.node_count(), 1u);
  EXPECT_EQ(t.steps_applied(), 2);
}

TEST(FreezeTree, ApplyRejectsFrozenVertex) {
  Tree t(1);
  t.apply(0, 1);
  t.apply(0, -1);
  EXPECT_THROW(t.apply(0, 1), PreconditionError);
  EXPECT_THROW(t.apply(1, 0), PreconditionError);
  EXPECT_THROW(t.apply(7, 1), PreconditionError);
}

TEST(FreezeTree, ChoiceIsUniformOverActives) {
  // A star: root with 4 children, root frozen. Each child should be picked
  // about 1/4 of the time.
  Tree base(1);
  for (int i = 0; i < 4; ++i) base.apply(0, 1);
  base.apply(0, -1);
  std::vector<int> hits(5, 0);
  RngStream c(5);
  for (int r = 0; r < 40'000; ++r) {
    Tree t = base;
    const auto rec = t.grow_step(1, c);
    ++hits[*rec.vertex];
  }
  EXPECT_EQ(hits[0], 0);
  for (int v = 1; v <= 4; ++v) EXPECT_NEAR(hits[v] / 40'000.0, 0.25, 4 * std::sqrt(0.1875 / 40'000));
}

TEST(OrderedActiveSet, SelectMatchesSortedSet) {
  OrderedActiveSet<std::uint32_t> a;
  std::set<std::uint32_t> ref;
  RngStream rng(9);
  std::uint32_t next = 0;
  for (int op = 0; op < 20'000; ++op) {
    if (ref.empty() || rng.uniform() < 0.55) {
      a.insert(next);
      ref.insert(next);
      ++next;
    } else {
      const auto i = rng.index(ref.size());
      auto it = ref.begin();
      std::advance(it, static_cast<std::ptrdiff_t>(i));
      ASSERT_EQ(a.at(i), *it);
      a.erase(*it);
      ref.erase(it);
    }
    ASSERT_EQ(a.size(), ref.size());
  }
  std::vector<std::uint32_t> seen;
  a.for_each([&](std::uint32_t v) { seen.push_back(v); });
  EXPECT_TRUE(std::equal(seen.begin(), seen.end(), ref.begin(), ref.end()));
}

TEST(FreezeTree, BackendsShareTheLawOfTheHeight) {
  // Same signs, independent choices: mean heights agree statistically.
  RngStream s(31);
  const auto x = positive_signs(400, 0.6, s);
  double a = 0.0;
  double b = 0.0;
  double a2 = 0.0;
  double b2 = 0.0;
  constexpr int kRuns = 3000;
  for (int r = 0; r < kRuns; ++r) {
    auto c1 = RngStream::for_replica(1, r, StreamRole::kChoices);
    auto c2 = RngStream::for_replica(2, r, StreamRole::kChoices);
    const double ha = build_from_signs<Tree>(x, 1, c1).height();
    const double hb = build_from_signs<OrderedTree>(x, 1, c2).height();
    a += ha;
    b += hb;
    a2 += ha * ha;
    b2 += hb * hb;
  }
  a /= kRuns;
  b /= kRuns;
  const double se = std::sqrt((a2 / kRuns - a * a + b2 / kRuns - b * b) / kRuns);
  EXPECT_NEAR(a, b, 4 * se);
}

TEST(Profile, CountsAndBands) {
  Tree t(1);
  t.apply(0, 1);  // 1 at height 1
  t.apply(0, 1);  // 2 at height 1
  t.apply(1, 1);  // 3 at height 2
  t.apply(0, -1);
  const auto p = active_profile(t);
  EXPECT_EQ(p.counts, (std::vector<std::int64_t>{0, 2, 1}));
  EXPECT_EQ(p.total(), 3);
  EXPECT_EQ(p.at(1), 2);
  EXPECT_EQ(p.at(9), 0);
  EXPECT_EQ(p.at(-1), 0);
  EXPECT_EQ(p.range(1), 3);
  EXPECT_EQ(p.range(2), 1);
  EXPECT_EQ(p.range(0, 1), 2);
  EXPECT_EQ(p.band(0.5, 1.5), 2);
  EXPECT_EQ(p.band(1.2, std::numeric_limits<double>::infinity()), 1);
  EXPECT_EQ(p.max_height(), 2);
}

TEST(Laplace, MatchesDirectSum) {
  RngStream s(41);
  RngStream c(42);
  const auto x = positive_signs(3000, 0.6, s);
  const auto t = build_from_signs(std::span<const std::int8_t>(x), 1, c);
  for (Complex z : {Complex(0.3, 0.0), Complex(-0.7, 1.1), Complex(1.2, -2.0), Complex(0.0, 0.0)}) {
    const Complex got = laplace_transform(t, z);
    const Complex want = brute_laplace(t, z);
    EXPECT_LE(std::abs(got - want), 1e-12 * std::abs(want)) << z;
  }
  EXPECT_NEAR(laplace_transform(t, Complex(0.0)).real(), 1.0, 1e-15);
}

TEST(Laplace, UndefinedWithoutActives) {
  Tree t(1);
  t.apply(0, -1);
  EXPECT_THROW(laplace_transform(t, Complex(0.1)), PreconditionError);
  EXPECT_THROW(fourier_invert(t, 0.0, 0), PreconditionError);
}

// The conditional mean of L after one step, by applying the step to every
// possible vertex on a copy of the tree.
Complex brute_one_step(const Tree& t, int sign, Complex z) {
  Complex acc = 0.0;
  for (std::size_t i = 0; i < t.active_count(); ++i) {
    Tree copy = t;
    copy.apply(t.nth_active(i), sign);
    acc += brute_laplace(copy, z);
  }
  return acc / static_cast<double>(t.active_count());
}

TEST(OneStep, ProductFormAgainstEnumeration) {
  RngStream rng(51);
  for (int trial = 0; trial < 300; ++trial) {
    const auto len = 1 + rng.index<std::size_t>(60);
    const auto x = positive_signs(len, 0.6, rng);
    auto c = RngStream::for_replica(52, static_cast<std::uint64_t>(trial), StreamRole::kChoices);
    const auto t = build_from_signs(std::span<const std::int8_t>(x), 1, c);
    const Complex z(-1.0 + 2.0 * rng.uniform(), -3.0 + 6.0 * rng.uniform());
    for (int sign : {1, -1}) {
      if (sign < 0 && t.active_count() < 2) continue;
      const auto chk = one_step_expectation_check(t, sign, z);
      const Complex want = brute_one_step(t, sign, z);
      EXPECT_LE(std::abs(chk.lhs - want), 1e-12 * (1.0 + std::abs(want)));
      EXPECT_LE(chk.residual, 1e-12 * (1.0 + std::abs(chk.rhs)));
    }
  }
}

TEST(OneStep, RejectsEmptyingStep) {
  Tree t(1);
  EXPECT_THROW(one_step_expectation_check(t, -1, Complex(0.2)), PreconditionError);
  EXPECT_THROW(one_step_expectation_check(t, 0, Complex(0.2)), PreconditionError);
}

TEST(Fourier, InversionRecoversProfile) {
  RngStream rng(61);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = positive_signs(1 + rng.index<std::size_t>(400), 0.6, rng);
    auto c = RngStream::for_replica(62, static_cast<std::uint64_t>(trial), StreamRole::kChoices);
    const auto t = build_from_signs(std::span<const std::int8_t>(x), 1, c);
    const auto p = active_profile(t);
    const double h = -0.5 + rng.uniform();
    for (std::int64_t k = 0; k <= p.max_height() + 1; ++k) {
      const double want = static_cast<double>(p.at(k)) / static_cast<double>(p.total());
      EXPECT_NEAR(fourier_invert(t, h, k), want, 1e-10) << k;
    }
  }
}

TEST(Martingale, SequenceStartsAtLaplaceAndSkipsPreJ) {
  // A deterministic trace that climbs well past the threshold.
  std::vector<std::int8_t> x;
  for (int i = 0; i < 300; ++i) x.push_back(i % 4 == 3 ? -1 : 1);
  const auto w = walk_from_signs(x);
  RngStream c(71);
  const Complex z(0.3, 0.2);
  const auto path = martingale_sequence(x, w, 100, 2.0, z, 3.0, c);
  EXPECT_EQ(path.J, *compute_J(w, 2.0, 300));
  EXPECT_EQ(path.last, 300);
  EXPECT_FALSE(path.at(path.J - 1).has_value());
  EXPECT_FALSE(path.at(301).has_value());
  ASSERT_TRUE(path.at(path.J).has_value());
  EXPECT_LE(std::abs(*path.at(path.J) - path.L.front()), 1e-15);
  EXPECT_EQ(path.C.front(), Complex(1.0));
  Complex c_last = 1.0;
  for (std::int64_t i = path.J + 1; i <= 300; ++i) {
    if (x[i - 1] > 0) c_last *= 1.0 + (std::exp(z) - 1.0) / static_cast<double>(w[i]);
  }
  EXPECT_LE(std::abs(path.C.back() - c_last), 1e-12 * std::abs(c_last));
  EXPECT_GT(path.min_factor_modulus, 0.5);
  for (std::size_t i = 0; i < path.M.size(); ++i) EXPECT_LE(std::abs(path.M[i] * path.C[i] - path.L[i]), 1e-12 * std::abs(path.L[i]));
}

TEST(Martingale, DomainChecks) {
  std::vector<std::int8_t> x{1, 1, -1};
  const auto w = walk_from_signs(x);
  RngStream c(1);
  EXPECT_THROW(martingale_sequence(x, w, 1, 2.0, Complex(2.0, 0.0), 3.0, c), DomainError);
  EXPECT_THROW(martingale_sequence(x, w, 1, 2.0, Complex(0.1, 0.0), 5.0, c), PreconditionError);
}

TEST(Export, VertexCsv) {
  Tree t(1);
  t.apply(0, 1);
  t.apply(1, 1);
  t.apply(0, -1);
  std::ostringstream os;
  write_vertex_csv(t, os);
  EXPECT_EQ(os.str(),
            "node,parent,height,birth_step,state\n"
            "0,-1,0,0,frozen\n"
            "1,0,1,1,active\n"
            "2,1,2,2,active\n");
}

}  // namespace
}  // namespace sirtree
