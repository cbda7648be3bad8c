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

// Principal branch of the Lambert W function on [-1/e, inf), plus the
// closed-form lower bounds and series inequalities used to reason about it.

#ifndef SIRTREE_LAMBERTW_HPP_
#define SIRTREE_LAMBERTW_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>

#include "sirtree/errors.hpp"

namespace sirtree {

inline constexpr double kInvE = 0.36787944117144233;  // 1/e rounded to double
inline constexpr double kBranchTolerance = 1e-15;

namespace detail {

// Seeds for Halley. Near the branch point the square-root expansion
// W = -1 + p - p^2/3 + 11 p^3 / 72, p = sqrt(2(1 + e x)) is accurate to O(p^4).
inline double lambert_seed(double x) {
  constexpr double e = std::numbers::e;
  if (x < -0.2 * kInvE) {
    const double p = std::sqrt(std::max(0.0, 2.0 * e * (x + kInvE)));
    return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * 11.0 / 72.0));
  }
  if (x < e) return std::log1p(x);
  const double l1 = std::log(x);
  const double l2 = std::log(l1);
  return l1 - l2 + l2 / l1;
}

}  // namespace detail

// W0(x), the solution w >= -1 of w e^w = x.
inline double lambert_w0(double x) {
  if (std::isnan(x)) throw DomainError("lambert_w0: NaN argument");
  if (x < -kInvE - kBranchTolerance) {
    throw DomainError("lambert_w0: argument below -1/e");
  }
  if (x <= -kInvE + kBranchTolerance) return -1.0;
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return x;

  double w = detail::lambert_seed(x);
  for (int iter = 0; iter < 50; ++iter) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    if (wp1 == 0.0) break;
    const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
    if (denom == 0.0 || !std::isfinite(denom)) break;
    const double step = f / denom;
    const double next = w - step;
    w = next > -1.0 ? next : 0.5 * (w - 1.0);  // stay on the principal branch
    if (std::abs(step) < 1e-15 * (1.0 + std::abs(w))) break;
  }
  return w;
}

// W(x) >= -1 + sqrt(2e) sqrt(x + 1/e) - (2/3) e (x + 1/e) on [-1/e, 0].
inline double lower_bound_branch(double x) {
  if (!(x >= -kInvE - kBranchTolerance && x <= 0.0)) {
    throw DomainError("lower_bound_branch: argument outside [-1/e, 0]");
  }
  constexpr double e = std::numbers::e;
  const double y = std::max(0.0, x + kInvE);
  return -1.0 + std::sqrt(2.0 * e) * std::sqrt(y) - (2.0 / 3.0) * e * y;
}

// W(-λ e^{-λ}) >= (λ-1) sqrt(2 - 2λ + λ^2) - 2 + 2λ - λ^2 for λ >= 1.
inline double lower_bound_lambda(double lambda) {
  if (!(lambda >= 1.0)) throw DomainError("lower_bound_lambda: λ < 1");
  const double q = 2.0 - 2.0 * lambda + lambda * lambda;
  return (lambda - 1.0) * std::sqrt(q) - q;
}

// ---------------------------------------------------------------------------
// Series inequalities for e^{-h}(1+h) and the bound-check suites.

// D(h) = 1 - e^{-h}(1+h) = sum_{k>=2} (-1)^k (k-1) h^k / k!. Summed as a series
// for small h so the O(h^5) gaps below stay above rounding noise.
inline double poisson_defect(double h) {
  if (h > 0.5) return 1.0 - std::exp(-h) * (1.0 + h);
  double term = h;  // h^k / k! at k = 1
  double sum = 0.0;
  for (int k = 2; k < 40; ++k) {
    term *= h / k;
    const double c = (k % 2 == 0 ? 1.0 : -1.0) * (k - 1) * term;
    sum += c;
    if (std::abs(c) < 1e-20 * std::abs(sum)) break;
  }
  return sum;
}

inline double series_lower(double h) {
  return 1.0 - h * h / 2.0 + h * h * h / 3.0 - std::pow(h, 4) / 8.0;
}

inline double series_upper(double h) {
  return series_lower(h) + std::pow(h, 5) / 30.0 - std::pow(h, 6) / 144.0 +
         std::pow(h, 7) / 840.0;
}

// Right-hand side of sqrt(2 - 2e^{-h}(1+h)) >= h - h^2/3 + 5h^3/72 - 11h^4/1080.
inline double input2_rhs(double h) {
  return h - h * h / 3.0 + 5.0 * h * h * h / 72.0 - 11.0 * std::pow(h, 4) / 1080.0;
}

// Summary of one bound suite: `min_margin` is min(bound side - other side);
// a violation is a strictly negative margin.
struct BoundCheck {
  std::size_t points = 0;
  std::size_t violations = 0;
  double min_margin = std::numeric_limits<double>::infinity();

  void record(double margin) {
    ++points;
    if (margin < 0.0) ++violations;
    min_margin = std::min(min_margin, margin);
  }
};

struct ResidualCheck {
  std::size_t points = 0;
  std::size_t violations = 0;
  double max_scaled_residual = 0.0;  // max |W e^W - x| / max(1, |x|)
};

// Weyl sequence frac(i * (sqrt(5)-1)/2): low-discrepancy points in [0, 1).
inline double weyl_point(std::size_t i) {
  constexpr double kAlpha = 0.6180339887498949;
  const double v = static_cast<double>(i) * kAlpha;
  return v - std::floor(v);
}

inline ResidualCheck verify_residual(std::size_t count, double lo = -kInvE,
                                     double hi = 1e3, double tol = 1e-12) {
  ResidualCheck out;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = lo + (hi - lo) * weyl_point(i);
    const double w = lambert_w0(x);
    const double r = std::abs(w * std::exp(w) - x) / std::max(1.0, std::abs(x));
    ++out.points;
    if (r > tol) ++out.violations;
    out.max_scaled_residual = std::max(out.max_scaled_residual, r);
  }
  return out;
}

// Uniform grid of `count` points on [lo, hi], endpoints included.
template <class F>
void for_grid(std::size_t count, double lo, double hi, F&& f) {
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    f(lo + (hi - lo) * t);
  }
}

inline BoundCheck verify_branch_bound(std::size_t count) {
  BoundCheck out;
  for_grid(count, -kInvE, 0.0, [&](double x) {
    out.record(lambert_w0(x) - lower_bound_branch(x));
  });
  return out;
}

inline BoundCheck verify_lambda_bound(std::size_t count, double hi = 50.0) {
  BoundCheck out;
  for_grid(count, 1.0, hi, [&](double lambda) {
    const double w = lambert_w0(-lambda * std::exp(-lambda));
    out.record(w - lower_bound_lambda(lambda));
  });
  return out;
}

namespace detail {
// Σ_{k>=from} (-1)^k (k-1)/k! h^(k-from): the tail of D(h) past degree from-1,
// divided by h^from.
inline double defect_tail(double h, int from) {
  double fact = 1.0;
  for (int k = 2; k <= from; ++k) fact *= k;
  double acc = 0.0;
  double pw = 1.0;
  for (int k = from; k < from + 40; ++k) {
    if (k > from) fact *= k;
    acc += (k % 2 == 0 ? 1.0 : -1.0) * (k - 1) / fact * pw;
    pw *= h;
  }
  return acc;
}
}  // namespace detail

// Both sides of the two-sided polynomial bracket for e^{-h}(1+h) on [0, hi].
// The polynomials are the Taylor sections of degree 4 and 7, so for h < 1/2
// each margin is a series tail, evaluated directly and scaled by h^-5 or h^-8.
inline BoundCheck verify_series_bounds(std::size_t count, double hi = 10.0) {
  BoundCheck out;
  for_grid(count, 0.0, hi, [&](double h) {
    if (h < 0.5) {
      out.record(-detail::defect_tail(h, 5));  // lower bound on e^{-h}(1+h)
      out.record(detail::defect_tail(h, 8));   // upper bound on e^{-h}(1+h)
      return;
    }
    const double d = poisson_defect(h);
    out.record((1.0 - series_lower(h)) - d);
    out.record(d - (1.0 - series_upper(h)));
  });
  return out;
}

// sqrt(2 D(h)) >= input2_rhs(h) on [0, 1], compared on squares (both sides
// are non-negative there) and scaled by h^-6 near zero where the gap is
// O(h^6).
inline BoundCheck verify_input2(std::size_t count) {
  BoundCheck out;
  for_grid(count, 0.0, 1.0, [&](double h) {
    if (h == 0.0) {
      out.record(0.0);
      return;
    }
    const double p = input2_rhs(h);
    double margin;
    if (h < 0.25) {
      // Coefficients of 2D(h) - p(h)^2 cancel through h^5; the remainder is
      // sum_{k>=6} c_k h^k with c_k from the two power series.
      constexpr double kPoly[5] = {1.0, -1.0 / 3.0, 5.0 / 72.0, -11.0 / 1080.0, 0.0};
      double sq[9] = {};
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) sq[i + j] += kPoly[i] * kPoly[j];
      // p^2 = h^2 * sum sq[m] h^m; 2D = sum_{k>=2} 2(-1)^k (k-1)/k! h^k.
      double fact = 1.0;
      double acc = 0.0;
      for (int k = 2; k < 40; ++k) {
        fact *= k;
        double ck = 2.0 * (k % 2 == 0 ? 1.0 : -1.0) * (k - 1) / fact;
        if (k - 2 <= 8) ck -= sq[k - 2];
        if (k >= 6) acc += ck * std::pow(h, k - 6);
      }
      margin = acc;  // (2D - p^2) / h^6
    } else {
      margin = std::sqrt(2.0 * poisson_defect(h)) - p;
    }
    out.record(margin);
  });
  return out;
}

}  // namespace sirtree

#endif  // SIRTREE_LAMBERTW_HPP_
