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


#include "sirtree/lambertw.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/lambert_w.hpp>
#include <gtest/gtest.h>

namespace sirtree {
namespace {

// Reference values from a 40-digit evaluation.
struct Ref {
  double x;
  double w;
};
constexpr Ref kRefs[] = {
    {-0.3, -0.48940222718021493357}, {-0.1, -0.11183255915896297182}, {0.5, 0.35173371124919582602},
    {1.0, 0.567143290409783873},     {10.0, 1.7455280027406993831},  {1000.0, 5.2496028524015962271},
};

TEST(LambertW, ReferenceValues) {
  for (const auto& r : kRefs) EXPECT_NEAR(lambert_w0(r.x), r.w, 2e-15 * std::max(1.0, std::abs(r.w))) << r.x;
}

TEST(LambertW, AgreesWithBoostAwayFromBranchPoint) {
  for (std::size_t i = 0; i < 10'000; ++i) {
    const double x = -kInvE + 1e-6 + (1e3 + kInvE) * weyl_point(i);
    const double want = boost::math::lambert_w0(x);
    EXPECT_NEAR(lambert_w0(x), want, 1e-12 * std::max(1.0, std::abs(want))) << x;
  }
}

TEST(LambertW, SpecialPoints) {
  EXPECT_EQ(lambert_w0(0.0), 0.0);
  EXPECT_NEAR(lambert_w0(std::numbers::e), 1.0, 1e-15);
  EXPECT_EQ(lambert_w0(-kInvE), -1.0);
  EXPECT_EQ(lambert_w0(-kInvE + 0.5e-15), -1.0);
  EXPECT_EQ(lambert_w0(std::numeric_limits<double>::infinity()), std::numeric_limits<double>::infinity());
}

TEST(LambertW, NearBranchPointStaysOnPrincipalBranch) {
  for (double d : {1e-14, 1e-12, 1e-10, 1e-8, 1e-6}) {
    const double x = -kInvE + d;
    const double w = lambert_w0(x);
    EXPECT_GE(w, -1.0);
    EXPECT_LE(std::abs(w * std::exp(w) - x), 1e-15);
    // W ≈ -1 + sqrt(2 e d) to leading order.
    EXPECT_NEAR(w, -1.0 + std::sqrt(2.0 * std::numbers::e * d), 2.0 * std::numbers::e * d + 1e-7);
  }
}

TEST(LambertW, RejectsOutOfDomain) {
  EXPECT_THROW(lambert_w0(-0.5), DomainError);
  EXPECT_THROW(lambert_w0(-kInvE - 1e-12), DomainError);
  EXPECT_THROW(lambert_w0(std::numeric_limits<double>::quiet_NaN()), DomainError);
}

TEST(LambertW, ResidualSuite) {
  const auto r = verify_residual(10'000);
  EXPECT_EQ(r.points, 10'000u);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_LE(r.max_scaled_residual, 1e-12);
}

TEST(LambertW, BranchLowerBound) {
  const auto b = verify_branch_bound(10'000);
  EXPECT_EQ(b.violations, 0u);
  EXPECT_EQ(lower_bound_branch(-kInvE), -1.0);
  EXPECT_NEAR(lower_bound_branch(0.0), -1.0 + std::sqrt(2.0) - 2.0 / 3.0, 1e-15);
  EXPECT_THROW(lower_bound_branch(0.1), DomainError);
}

TEST(LambertW, RateLowerBound) {
  const auto b = verify_lambda_bound(10'000);
  EXPECT_EQ(b.violations, 0u);
  // Tight at λ = 1 where both sides are -1.
  EXPECT_NEAR(lower_bound_lambda(1.0), -1.0, 1e-15);
  EXPECT_THROW(lower_bound_lambda(0.5), DomainError);
}

TEST(LambertW, SeriesBrackets) {
  const auto s = verify_series_bounds(10'000);
  EXPECT_EQ(s.violations, 0u);
  const auto i2 = verify_input2(10'000);
  EXPECT_EQ(i2.violations, 0u);
}

TEST(LambertW, PoissonDefectMatchesDirectForm) {
  for (double h : {0.05, 0.2, 0.45, 0.6, 2.0}) {
    EXPECT_NEAR(poisson_defect(h), 1.0 - std::exp(-h) * (1.0 + h), 1e-15);
  }
  // Leading term h^2 / 2.
  EXPECT_NEAR(poisson_defect(1e-6) / 5e-13, 1.0, 1e-5);
}

}  // namespace
}  // namespace sirtree
