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


// Experiment configuration: one struct for every subcommand, validated
// up front so that bad input never reaches a simulation.

#ifndef SIRTREE_HARNESS_CONFIG_HPP_
#define SIRTREE_HARNESS_CONFIG_HPP_

#include <cmath>
#include <cstdint>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sirtree/errors.hpp"
#include "sirtree/theory.hpp"

namespace sirtree::harness {

enum class ExperimentKind { kHeight, kProfile, kFluid, kDangling, kSurvival, kMartingaleCheck, kCouplingDemo, kUrn };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kHeight:
      return "height";
    case ExperimentKind::kProfile:
      return "profile";
    case ExperimentKind::kFluid:
      return "fluid";
    case ExperimentKind::kDangling:
      return "dangling";
    case ExperimentKind::kSurvival:
      return "survival";
    case ExperimentKind::kMartingaleCheck:
      return "martingale-check";
    case ExperimentKind::kCouplingDemo:
      return "coupling-demo";
    case ExperimentKind::kUrn:
      return "urn";
  }
  return "unknown";
}

enum class UrnPreset { kPolya, kAlternating, kFromTree };

inline std::string_view to_string(UrnPreset p) {
  switch (p) {
    case UrnPreset::kPolya:
      return "polya";
    case UrnPreset::kAlternating:
      return "alternating";
    case UrnPreset::kFromTree:
      return "from-tree";
  }
  return "unknown";
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kHeight;
  double lambda = 2.0;
  std::int64_t n = 10'000;
  std::int64_t replicas = 100;
  // When > 0, stop at the shortest prefix of replica ids holding this many
  // survivors; `replicas` then caps the number of runs.
  std::int64_t survivors = 0;
  // Snapshot time as a multiple of n (profile, martingale), or the end of the
  // comparison window (fluid).
  double t = 1.0;
  double delta = 0.05;
  // Survival proxy: tau >= floor(survival_fraction * t_λ * n).
  double survival_fraction = 0.5;
  std::vector<double> x_grid{0.2, 0.4, 0.6};
  // Upper band edge y for the profile window [γe^x log n, γe^y log n].
  double band_y = std::numeric_limits<double>::infinity();
  std::vector<std::complex<double>> z_list{{0.3, 0.0}, {-0.5, 0.0}, {0.5, 0.4}};
  // Coupling demo.
  std::int64_t roots = 5;
  double p = 0.6;
  double q = 0.8;
  double r = 0.7;
  // Urn.
  UrnPreset preset = UrnPreset::kPolya;
  std::int64_t k = 10'000;
  std::uint64_t seed = 1;
  int threads = 1;
  bool force = false;  // allow ill-conditioned λ in (1, 1.05]
};

namespace detail {
inline void config_check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}
}  // namespace detail

inline bool needs_rate(ExperimentKind k) {
  return k != ExperimentKind::kCouplingDemo && !(k == ExperimentKind::kUrn);
}

// Throws ConfigError on the first violated invariant.
inline void validate(const ExperimentConfig& c) {
  using detail::config_check;
  config_check(c.replicas >= 1, "replicas must be >= 1");
  config_check(c.survivors >= 0 && c.survivors <= c.replicas, "survivors must lie in [0, replicas]");
  config_check(c.threads >= 1, "threads must be >= 1");
  config_check(c.n >= 1, "n must be >= 1");
  const bool rate = needs_rate(c.kind) || c.preset == UrnPreset::kFromTree;
  if (rate) {
    config_check(std::isfinite(c.lambda) && c.lambda > 1.0, "lambda must exceed 1");
    config_check(c.force || c.lambda > 1.05,
                 "lambda in (1, 1.05] is ill-conditioned (gamma blows up); pass --force to run anyway");
  }
  const auto kind = c.kind;
  if (kind == ExperimentKind::kProfile || kind == ExperimentKind::kFluid ||
      kind == ExperimentKind::kMartingaleCheck) {
    config_check(c.t > 0.0 && c.t < t_lambda(c.lambda), "t must lie in (0, t_lambda)");
  }
  if (kind == ExperimentKind::kHeight || kind == ExperimentKind::kSurvival || kind == ExperimentKind::kProfile ||
      kind == ExperimentKind::kDangling) {
    config_check(c.survival_fraction > 0.0 && c.survival_fraction < 1.0, "survival fraction must lie in (0, 1)");
  }
  if (kind == ExperimentKind::kProfile || kind == ExperimentKind::kDangling) {
    const double z = z_lambda(c.lambda);
    config_check(!c.x_grid.empty(), "x grid must not be empty");
    for (double x : c.x_grid) config_check(x > 0.0 && x < z, "x grid must lie inside (0, z_lambda)");
    for (double x : c.x_grid) config_check(c.band_y > x, "band upper edge y must exceed every x");
  }
  if (kind == ExperimentKind::kDangling) {
    config_check(c.delta > 0.0 && c.delta < 1.0, "delta must lie in (0, 1)");
  }
  if (kind == ExperimentKind::kMartingaleCheck) {
    // The ensemble check stays inside {Re z < z_λ}, where the martingales converge.
    const double zl = z_lambda(c.lambda);
    config_check(!c.z_list.empty(), "z list must not be empty");
    for (auto z : c.z_list) config_check(z.real() < zl, "every z must satisfy Re z < z_lambda");
  }
  if (kind == ExperimentKind::kCouplingDemo) {
    config_check(c.roots >= 1, "roots must be >= 1");
    config_check(c.p > 0.5 && c.p <= c.q && c.q < 1.0, "coupling needs 1/2 < p <= q < 1");
    config_check(c.r >= 0.0 && c.r <= 1.0, "r must lie in [0, 1]");
  }
  if (kind == ExperimentKind::kUrn) config_check(c.k >= 1, "k must be >= 1");
}

// Canonical JSON of the configuration. `threads` is left out: it changes
// scheduling only, never results.
inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(c.kind));
  j["lambda"] = c.lambda;
  j["n"] = c.n;
  j["replicas"] = c.replicas;
  j["survivors"] = c.survivors;
  j["t"] = c.t;
  j["delta"] = c.delta;
  j["survival_fraction"] = c.survival_fraction;
  j["x_grid"] = c.x_grid;
  j["band_y"] = std::isinf(c.band_y) ? nlohmann::json("inf") : nlohmann::json(c.band_y);
  auto zs = nlohmann::json::array();
  for (auto z : c.z_list) zs.push_back({z.real(), z.imag()});
  j["z_list"] = zs;
  j["roots"] = c.roots;
  j["p"] = c.p;
  j["q"] = c.q;
  j["r"] = c.r;
  j["preset"] = std::string(to_string(c.preset));
  j["k"] = c.k;
  j["seed"] = c.seed;
  j["force"] = c.force;
  return j;
}

// 64-bit FNV-1a (offset 0xcbf29ce484222325, prime 0x100000001b3).
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::uint64_t h = fnv1a64(to_json(c).dump());
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xF];
  return out;
}

}  // namespace sirtree::harness

#endif  // SIRTREE_HARNESS_CONFIG_HPP_
