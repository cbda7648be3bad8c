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

// Closed-form limit constants of the SIR infection tree with per-pair rate
// λ/n: the profile exponent f_λ, its zero z_λ, the dangling-tree offspring
// mean m_λ, the fluid limit g_λ and extinction time t_λ, the critical rate
// λ_c and the height constant κ(λ).

#ifndef SIRTREE_THEORY_HPP_
#define SIRTREE_THEORY_HPP_

#include <cmath>
#include <complex>
#include <string_view>
#include <utility>

#include "sirtree/errors.hpp"
#include "sirtree/lambertw.hpp"

namespace sirtree {

enum class Regime { kSubcritical, kCritical, kSupercritical };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::kSubcritical:
      return "subcritical";
    case Regime::kCritical:
      return "critical";
    case Regime::kSupercritical:
      return "supercritical";
  }
  return "unknown";
}

namespace detail {
inline void require_rate(double lambda) {
  require_domain(lambda > 1.0, "rate multiplier λ must exceed 1");
}
}  // namespace detail

// γ = λ/(λ-1).
inline double gamma_of(double lambda) {
  detail::require_rate(lambda);
  return lambda / (lambda - 1.0);
}

// f_λ(z) = 1 + γ (e^z - 1 - z e^z); T is double or std::complex<double>.
template <class T>
T f_lambda(double lambda, T z) {
  const double g = gamma_of(lambda);
  const T ez = std::exp(z);
  return T(1.0) + g * (ez - T(1.0) - z * ez);
}

// z_λ = 1 + W(-1/(eλ)), the positive zero of f_λ.
inline double z_lambda(double lambda) {
  detail::require_rate(lambda);
  return 1.0 + lambert_w0(-kInvE / lambda);
}

// m_λ = -W(-λ e^{-λ}); m_1 = 1 and 0 < m_λ < 1 for λ > 1.
inline double m_lambda(double lambda) {
  detail::require_domain(lambda >= 1.0, "m_lambda: λ < 1");
  return -lambert_w0(-lambda * std::exp(-lambda));
}

// Fluid limit of H/n: g_λ(t) = W(λ e^{λ - λt}) / λ, the solution of
// g' = -λg/(1+λg), g(0) = 1.
inline double g_lambda(double lambda, double t) {
  detail::require_rate(lambda);
  detail::require_domain(t >= 0.0, "g_lambda: t < 0");
  return lambert_w0(lambda * std::exp(lambda * (1.0 - t))) / lambda;
}

// Extinction time of the fluid limit 2 - 2g_λ(t) - t: t_λ = 2 - 2m_λ/λ.
inline double t_lambda(double lambda) {
  detail::require_rate(lambda);
  return 2.0 - 2.0 * m_lambda(lambda) / lambda;
}

// Fluid limit of S/n (active count over n) at scaled time s.
inline double fluid_curve(double lambda, double s) {
  return 2.0 - 2.0 * g_lambda(lambda, s) - s;
}

// h_λ(x) = f_λ(x) / (-log m_λ).
inline double h_lambda(double lambda, double x) {
  detail::require_rate(lambda);
  return f_lambda(lambda, x) / -std::log(m_lambda(lambda));
}

// u(λ) = 1/m_λ - e^{z_λ}; negative on (1, λ_c), positive beyond.
inline double critical_gap(double lambda) {
  return 1.0 / m_lambda(lambda) - std::exp(z_lambda(lambda));
}

// The unique root of u on (1, ∞). Bisection on [1.2, 3]; u(1) = 0 is the
// spurious root excluded by the bracket.
inline double lambda_c() {
  static const double value = [] {
    double lo = 1.2;
    double hi = 3.0;
    double flo = critical_gap(lo);
    if (!(flo < 0.0 && critical_gap(hi) > 0.0)) {
      throw DomainError("lambda_c: bracket [1.2, 3] does not change sign");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
      const double mid = 0.5 * (lo + hi);
      const double fm = critical_gap(mid);
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  }();
  return value;
}

// Two closed-form branches of κ. `kappa_left` is the dangling-dominated value
// γ/m_λ + h_λ(-log m_λ); `kappa_right` is the snapshot value γ e^{z_λ}.
inline double kappa_left(double lambda) {
  const double m = m_lambda(lambda);
  const double s = -std::log(m);
  return gamma_of(lambda) / m + f_lambda(lambda, s) / s;
}

inline double kappa_right(double lambda) {
  return gamma_of(lambda) * std::exp(z_lambda(lambda));
}

// Height constant: Height(T^n)/log n -> κ(λ) on survival.
inline double kappa(double lambda) {
  detail::require_rate(lambda);
  return lambda <= lambda_c() ? kappa_left(lambda) : kappa_right(lambda);
}

struct SupResult {
  double value;
  double argmax;
};

// max over s in [0, z_λ] of γ e^s + h_λ(s). Golden-section search, then
// compared against the stationary point min(-log m_λ, z_λ); the larger wins.
inline SupResult kappa_sup(double lambda) {
  detail::require_rate(lambda);
  const double g = gamma_of(lambda);
  const double logm = -std::log(m_lambda(lambda));
  const double z = z_lambda(lambda);
  auto objective = [&](double s) { return g * std::exp(s) + f_lambda(lambda, s) / logm; };

  constexpr double kInvPhi = 0.6180339887498949;
  double a = 0.0;
  double b = z;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  for (int i = 0; i < 200 && b - a > 1e-13; ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = objective(d);
    }
  }
  SupResult best{objective(0.5 * (a + b)), 0.5 * (a + b)};
  for (double s : {0.0, z, std::min(logm, z)}) {
    const double v = objective(s);
    if (v >= best.value) best = {v, s};
  }
  return best;
}

// Legendre transform of η(h) = γ(e^h - 1): F(θ) = θ log(θ/γ) - θ + γ.
inline double legendre_F(double lambda, double theta) {
  detail::require_domain(theta > 0.0, "legendre_F: θ must be positive");
  const double g = gamma_of(lambda);
  return theta * std::log(theta / g) - theta + g;
}

// Per-λ bundle of the constants above; immutable once built.
struct TheoryConstants {
  double lambda;
  double gamma;
  double z_lambda;
  double m_lambda;
  double t_lambda;
  double kappa;
  Regime regime;
  // γ → ∞ as λ → 1; Monte Carlo runs refuse these rates unless forced.
  bool ill_conditioned;

  static TheoryConstants at(double lambda) {
    detail::require_rate(lambda);
    const double m = sirtree::m_lambda(lambda);
    const double z = sirtree::z_lambda(lambda);
    const double gap = m - std::exp(-z);
    Regime regime = Regime::kCritical;
    if (std::abs(lambda - lambda_c()) > 1e-12) {
      regime = gap > 0.0 ? Regime::kSubcritical : Regime::kSupercritical;
    }
    return TheoryConstants{lambda,
                           gamma_of(lambda),
                           z,
                           m,
                           2.0 - 2.0 * m / lambda,
                           sirtree::kappa(lambda),
                           regime,
                           lambda <= 1.05};
  }
};

}  // namespace sirtree

#endif  // SIRTREE_THEORY_HPP_
