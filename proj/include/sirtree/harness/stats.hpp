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

#ifndef SIRTREE_HARNESS_STATS_HPP_
#define SIRTREE_HARNESS_STATS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "sirtree/errors.hpp"

namespace sirtree::stats {

struct ChiSquare {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  int bins = 0;
};

// Pearson test of integer samples against a pmf on {0, 1, ...}. Cells are
// 0..K-1 plus a tail cell {>= K}, with K the largest value keeping every
// expected count >= min_expected.
inline ChiSquare chi_square_test(std::span<const std::int64_t> samples,
                                 const std::function<double(std::int64_t)>& pmf,
                                 double min_expected = 5.0) {
  detail::require(!samples.empty(), "chi_square_test: no samples");
  const auto n = static_cast<double>(samples.size());
  std::vector<double> expected;
  double head = 0.0;
  for (std::int64_t k = 0;; ++k) {
    const double e = n * pmf(k);
    if (e < min_expected || n * (1.0 - head - pmf(k)) < min_expected) break;
    expected.push_back(e);
    head += pmf(k);
  }
  detail::require(!expected.empty(), "chi_square_test: too few samples for any cell");
  const auto K = static_cast<std::int64_t>(expected.size());
  expected.push_back(n * (1.0 - head));
  std::vector<double> observed(expected.size(), 0.0);
  for (auto v : samples) observed[static_cast<std::size_t>(std::clamp<std::int64_t>(v, 0, K))] += 1.0;

  ChiSquare out;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double d = observed[i] - expected[i];
    out.statistic += d * d / expected[i];
  }
  out.bins = static_cast<int>(expected.size());
  out.dof = out.bins - 1;
  const boost::math::chi_squared dist(out.dof);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

// sup_x |F_n(x) - F(x)| for an integer-valued sample against an exact CDF,
// evaluated at every integer in the sample range.
inline double ks_distance_discrete(std::span<const std::int64_t> samples,
                                   const std::function<double(std::int64_t)>& cdf) {
  detail::require(!samples.empty(), "ks_distance_discrete: no samples");
  std::vector<std::int64_t> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  double worst = 0.0;
  std::size_t i = 0;
  for (std::int64_t x = v.front() - 1; x <= v.back(); ++x) {
    while (i < v.size() && v[i] <= x) ++i;
    worst = std::max(worst, std::abs(static_cast<double>(i) / n - cdf(x)));
  }
  return worst;
}

// Kolmogorov distance of a continuous sample from Uniform(0, 1).
inline double ks_distance_uniform(std::span<const double> samples) {
  detail::require(!samples.empty(), "ks_distance_uniform: no samples");
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = std::clamp(v[i], 0.0, 1.0);
    worst = std::max({worst, static_cast<double>(i + 1) / n - x, x - static_cast<double>(i) / n});
  }
  return worst;
}

inline double binomial_se(double p, std::int64_t trials) {
  return std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

}  // namespace sirtree::stats

#endif  // SIRTREE_HARNESS_STATS_HPP_
