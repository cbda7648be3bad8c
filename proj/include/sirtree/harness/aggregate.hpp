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


#ifndef SIRTREE_HARNESS_AGGREGATE_HPP_
#define SIRTREE_HARNESS_AGGREGATE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include <json.hpp>

namespace sirtree::harness {

struct Summary {
  std::int64_t count = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double variance = std::numeric_limits<double>::quiet_NaN();  // unbiased
  double min = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
  double q1 = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double q3 = std::numeric_limits<double>::quiet_NaN();

  double iqr() const { return q3 - q1; }
  double stddev() const { return std::sqrt(variance); }
  double standard_error() const { return count > 0 ? std::sqrt(variance / static_cast<double>(count)) : variance; }
};

// Linear-interpolation quantile of sorted data (the usual "type 7").
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double f = pos - static_cast<double>(lo);
  if (f == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
  if (std::isinf(sorted[lo]) || std::isinf(sorted[hi])) return (1.0 - f) * sorted[lo] + f * sorted[hi];
  return sorted[lo] + f * (sorted[hi] - sorted[lo]);
}

// Values keyed by replica id. Merging is concatenation; the summary is
// computed from values in id order, so it is the same whatever order the
// records arrived in.
class Aggregator {
 public:
  void add(std::uint64_t id, double value) { items_.emplace_back(id, value); }
  void merge(const Aggregator& other) { items_.insert(items_.end(), other.items_.begin(), other.items_.end()); }
  std::size_t size() const { return items_.size(); }

  Summary summarize() const {
    auto items = items_;
    std::sort(items.begin(), items.end());
    Summary s;
    s.count = static_cast<std::int64_t>(items.size());
    if (items.empty()) return s;
    double mean = 0.0;
    double m2 = 0.0;
    std::int64_t k = 0;
    std::vector<double> values;
    values.reserve(items.size());
    for (const auto& [id, v] : items) {
      ++k;
      const double d = v - mean;
      mean += d / static_cast<double>(k);
      m2 += d * (v - mean);
      values.push_back(v);
    }
    s.mean = mean;
    s.variance = k > 1 ? m2 / static_cast<double>(k - 1) : 0.0;
    std::sort(values.begin(), values.end());
    // Welford turns infinite samples into NaN; report the mean the values imply.
    const bool neg_inf = std::isinf(values.front()) && values.front() < 0.0;
    const bool pos_inf = std::isinf(values.back()) && values.back() > 0.0;
    if (neg_inf || pos_inf) {
      constexpr double kInf = std::numeric_limits<double>::infinity();
      s.mean = neg_inf && pos_inf ? std::numeric_limits<double>::quiet_NaN() : (pos_inf ? kInf : -kInf);
      s.variance = std::numeric_limits<double>::quiet_NaN();
    }
    s.min = values.front();
    s.max = values.back();
    s.q1 = quantile_sorted(values, 0.25);
    s.median = quantile_sorted(values, 0.5);
    s.q3 = quantile_sorted(values, 0.75);
    return s;
  }

 private:
  std::vector<std::pair<std::uint64_t, double>> items_;
};

inline nlohmann::ordered_json to_json(const Summary& s) {
  nlohmann::ordered_json j;
  j["count"] = s.count;
  j["mean"] = s.mean;
  j["sd"] = s.count > 0 ? s.stddev() : s.variance;
  j["se"] = s.standard_error();
  j["min"] = s.min;
  j["q1"] = s.q1;
  j["median"] = s.median;
  j["q3"] = s.q3;
  j["max"] = s.max;
  return j;
}

}  // namespace sirtree::harness

#endif  // SIRTREE_HARNESS_AGGREGATE_HPP_
