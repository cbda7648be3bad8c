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


// Monte Carlo experiments. Every replica draws from its own streams
// (seed, replica id, role), so records depend only on the configuration and
// never on the thread count.

#ifndef SIRTREE_HARNESS_EXPERIMENTS_HPP_
#define SIRTREE_HARNESS_EXPERIMENTS_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sirtree/couplings.hpp"
#include "sirtree/freezetree.hpp"
#include "sirtree/harness/aggregate.hpp"
#include "sirtree/harness/config.hpp"
#include "sirtree/harness/parallel.hpp"
#include "sirtree/harness/persist.hpp"
#include "sirtree/harness/stats.hpp"
#include "sirtree/polya.hpp"
#include "sirtree/rng.hpp"
#include "sirtree/theory.hpp"
#include "sirtree/walks.hpp"

namespace sirtree::harness {

struct ExperimentResult {
  Table records;
  nlohmann::ordered_json summary;
};

namespace detail {

using json = nlohmann::ordered_json;

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

inline std::int64_t floor_steps(double fraction_of_n, std::int64_t n) {
  return static_cast<std::int64_t>(std::floor(fraction_of_n * static_cast<double>(n)));
}

inline std::int64_t survival_step(const ExperimentConfig& c, double fraction) {
  return floor_steps(fraction * t_lambda(c.lambda), c.n);
}

inline std::string tag(double x) { return format_double(x); }

// SIR chain and its infection tree advanced in lockstep.
class SirTreeRun {
 public:
  SirTreeRun(const ExperimentConfig& c, std::uint64_t replica)
      : lambda_n_(c.lambda / static_cast<double>(c.n)),
        signs_(RngStream::for_replica(c.seed, replica, StreamRole::kSigns)),
        choices_(RngStream::for_replica(c.seed, replica, StreamRole::kChoices)),
        tree_(1, static_cast<std::size_t>(c.n) + 2),
        H_(c.n) {}

  bool alive() const { return S_ > 0; }
  std::int64_t steps() const { return k_; }
  std::int64_t infectious() const { return S_; }
  const Tree& tree() const { return tree_; }

  StepRecord<Tree::Index> step() {
    const std::int8_t x = sign_from_uniform(signs_.uniform(), infection_probability(lambda_n_, H_));
    if (x > 0) --H_;
    S_ += x;
    ++k_;
    return tree_.grow_step(x, choices_);
  }

  void run_until(std::int64_t k) {
    while (alive() && k_ < k) step();
  }

  // The tree's active count is the infectious count at every step.
  void check_bookkeeping() const {
    if (static_cast<std::int64_t>(tree_.active_count()) != S_) {
      throw std::logic_error("bookkeeping: #active != S_k");
    }
  }

 private:
  double lambda_n_;
  RngStream signs_;
  RngStream choices_;
  Tree tree_;
  std::int64_t H_;
  std::int64_t S_ = 1;
  std::int64_t k_ = 0;
};

// Runs fn(id) over replica ids. With c.survivors > 0, runs batches until the
// shortest id prefix holding that many survivors is known and returns exactly
// that prefix (capped at c.replicas runs).
template <class R, class Fn, class Survived>
std::vector<R> collect(const ExperimentConfig& c, Fn&& fn, Survived&& survived) {
  if (c.survivors == 0) {
    std::vector<R> out(static_cast<std::size_t>(c.replicas));
    parallel_for(c.replicas, c.threads, [&](std::int64_t i) { out[static_cast<std::size_t>(i)] = fn(i); });
    return out;
  }
  std::vector<R> out;
  std::int64_t found = 0;
  while (found < c.survivors && static_cast<std::int64_t>(out.size()) < c.replicas) {
    const auto next = static_cast<std::int64_t>(out.size());
    const std::int64_t need = c.survivors - found;
    const std::int64_t batch = std::min(c.replicas - next, std::max<std::int64_t>(3 * need + 4, c.threads));
    std::vector<R> part(static_cast<std::size_t>(batch));
    parallel_for(batch, c.threads, [&](std::int64_t i) { part[static_cast<std::size_t>(i)] = fn(next + i); });
    for (auto& r : part) {
      found += survived(r) ? 1 : 0;
      out.push_back(std::move(r));
    }
  }
  std::int64_t seen = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (survived(out[i]) && ++seen == c.survivors) {
      out.resize(i + 1);
      break;
    }
  }
  return out;
}

inline json base_summary(const ExperimentConfig& c) {
  json j;
  j["experiment"] = std::string(to_string(c.kind));
  j["config_hash"] = config_hash(c);
  return j;
}

inline json binomial_block(std::int64_t hits, std::int64_t runs, double expected) {
  json j;
  const double rate = runs > 0 ? static_cast<double>(hits) / static_cast<double>(runs) : nan();
  const double band = 3.0 * stats::binomial_se(expected, runs);
  j["rate"] = rate;
  j["expected"] = expected;
  j["band_3se"] = band;
  j["within_band"] = std::abs(rate - expected) <= band;
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline ExperimentResult run_height(const ExperimentConfig& c) {
  validate(c);
  struct Rec {
    std::int64_t id = 0;
    bool survived = false;
    std::int64_t tau = 0;
    std::int64_t height = 0;
  };
  const std::int64_t k_surv = detail::survival_step(c, c.survival_fraction);
  const std::int64_t horizon = default_horizon(c.n);
  auto recs = detail::collect<Rec>(
      c,
      [&](std::int64_t id) {
        detail::SirTreeRun run(c, static_cast<std::uint64_t>(id));
        run.run_until(horizon);
        run.check_bookkeeping();
        return Rec{id, run.steps() >= k_surv, run.steps(), run.tree().height()};
      },
      [](const Rec& r) { return r.survived; });

  const double logn = std::log(static_cast<double>(c.n));
  ExperimentResult out;
  out.records.columns = {"replica", "survived", "tau", "height", "height_over_log_n"};
  Aggregator cond;
  std::int64_t survivors = 0;
  std::int64_t died = 0;
  std::int64_t died_small = 0;
  std::int64_t surv_lo = 0;
  std::int64_t surv_hi = 0;
  const std::int64_t k_lo = detail::survival_step(c, 0.25);
  const std::int64_t k_hi = detail::survival_step(c, 0.75);
  for (const auto& r : recs) {
    const double ratio = static_cast<double>(r.height) / logn;
    out.records.add_row({r.id, r.survived, r.tau, r.height, ratio});
    if (r.survived) {
      ++survivors;
      cond.add(static_cast<std::uint64_t>(r.id), ratio);
    } else {
      ++died;
      died_small += ratio <= 1.0;
    }
    surv_lo += r.tau >= k_lo;
    surv_hi += r.tau >= k_hi;
  }
  const auto runs = static_cast<std::int64_t>(recs.size());
  const double expected = 1.0 - 1.0 / c.lambda;
  auto& s = out.summary = detail::base_summary(c);
  s["lambda"] = c.lambda;
  s["n"] = c.n;
  s["runs"] = runs;
  s["survivors"] = survivors;
  s["survival"] = detail::binomial_block(survivors, runs, expected);
  s["survival_threshold_0.25"] = runs ? static_cast<double>(surv_lo) / static_cast<double>(runs) : detail::nan();
  s["survival_threshold_0.75"] = runs ? static_cast<double>(surv_hi) / static_cast<double>(runs) : detail::nan();
  s["kappa"] = kappa(c.lambda);
  s["height_over_log_n_given_survival"] = to_json(cond.summarize());
  s["died_out_height_le_log_n_fraction"] = died ? static_cast<double>(died_small) / static_cast<double>(died) : detail::nan();
  return out;
}

inline ExperimentResult run_survival(const ExperimentConfig& c) {
  validate(c);
  const std::vector<double> fractions{0.25, 0.5, 0.75};
  const double f_max = std::max(0.75, c.survival_fraction);
  const std::int64_t horizon = detail::survival_step(c, f_max);
  struct Rec {
    std::int64_t id = 0;
    std::int64_t tau = 0;
    bool absorbed = false;
  };
  auto survived_at = [&](const Rec& r, double f) { return !r.absorbed || r.tau >= detail::survival_step(c, f); };
  auto recs = detail::collect<Rec>(
      c,
      [&](std::int64_t id) {
        auto rng = RngStream::for_replica(c.seed, static_cast<std::uint64_t>(id), StreamRole::kSigns);
        const auto tr = simulate_sir(c.n, c.lambda / static_cast<double>(c.n), horizon, rng);
        return Rec{id, tr.tau, tr.absorbed};
      },
      [&](const Rec& r) { return survived_at(r, c.survival_fraction); });

  ExperimentResult out;
  out.records.columns = {"replica", "tau", "absorbed"};
  for (double f : fractions) out.records.columns.push_back("survived_" + detail::tag(f));
  std::vector<std::int64_t> hits(fractions.size(), 0);
  std::int64_t primary = 0;
  for (const auto& r : recs) {
    std::vector<Value> row{r.id, r.tau, r.absorbed};
    for (std::size_t i = 0; i < fractions.size(); ++i) {
      const bool sv = survived_at(r, fractions[i]);
      hits[i] += sv;
      row.emplace_back(sv);
    }
    primary += survived_at(r, c.survival_fraction);
    out.records.add_row(std::move(row));
  }
  const auto runs = static_cast<std::int64_t>(recs.size());
  const double expected = 1.0 - 1.0 / c.lambda;
  auto& s = out.summary = detail::base_summary(c);
  s["lambda"] = c.lambda;
  s["n"] = c.n;
  s["runs"] = runs;
  s["threshold_fraction"] = c.survival_fraction;
  s["threshold_step"] = detail::survival_step(c, c.survival_fraction);
  s["survival"] = detail::binomial_block(primary, runs, expected);
  detail::json sens;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    sens[detail::tag(fractions[i])] = static_cast<double>(hits[i]) / static_cast<double>(runs);
  }
  s["sensitivity"] = sens;
  return out;
}

inline constexpr double kFluidTolerance = 0.02;

inline ExperimentResult run_fluid(const ExperimentConfig& c) {
  validate(c);
  const FluidCurve curve(c.n, c.lambda, c.t);
  struct Rec {
    std::int64_t id = 0;
    std::int64_t steps = 0;
    std::optional<double> deviation;
  };
  auto recs = detail::collect<Rec>(
      c,
      [&](std::int64_t id) {
        auto rng = RngStream::for_replica(c.seed, static_cast<std::uint64_t>(id), StreamRole::kSigns);
        const auto tr = simulate_sir(c.n, c.lambda / static_cast<double>(c.n), curve.last_step(), rng);
        return Rec{id, tr.length(), fluid_deviation(tr, curve)};
      },
      [](const Rec& r) { return r.deviation.has_value(); });

  ExperimentResult out;
  out.records.columns = {"replica", "survived", "steps", "deviation"};
  Aggregator dev;
  std::int64_t survivors = 0;
  std::int64_t close = 0;
  for (const auto& r : recs) {
    out.records.add_row({r.id, r.deviation.has_value(), r.steps,
                         r.deviation ? Value(*r.deviation) : Value(std::monostate{})});
    if (r.deviation) {
      ++survivors;
      close += *r.deviation <= kFluidTolerance;
      dev.add(static_cast<std::uint64_t>(r.id), *r.deviation);
    }
  }
  auto& s = out.summary = detail::base_summary(c);
  s["lambda"] = c.lambda;
  s["n"] = c.n;
  s["t_max"] = c.t;
  s["runs"] = static_cast<std::int64_t>(recs.size());
  s["survivors"] = survivors;
  s["tolerance"] = kFluidTolerance;
  s["fraction_within_tolerance"] = survivors ? static_cast<double>(close) / static_cast<double>(survivors) : detail::nan();
  s["deviation"] = to_json(dev.summarize());
  return out;
}

inline ExperimentResult run_profile(const ExperimentConfig& c) {
  validate(c);
  const std::int64_t K = detail::floor_steps(c.t, c.n);
  const double logn = std::log(static_cast<double>(c.n));
  const double g = gamma_of(c.lambda);
  struct Rec {
    std::int64_t id = 0;
    bool survived = false;
    std::int64_t actives = 0;
    double mean_height = 0.0;
    std::vector<std::int64_t> counts;
  };
  auto recs = detail::collect<Rec>(
      c,
      [&](std::int64_t id) {
        detail::SirTreeRun run(c, static_cast<std::uint64_t>(id));
        run.run_until(K);
        run.check_bookkeeping();
        Rec r{id, run.steps() == K && run.alive(), run.infectious(), 0.0, {}};
        if (r.survived) {
          const auto prof = active_profile(run.tree());
          if (prof.total() != run.infectious()) throw std::logic_error("profile total != S_k");
          double sum = 0.0;
          for (std::size_t h = 0; h < prof.counts.size(); ++h) sum += static_cast<double>(h) * static_cast<double>(prof.counts[h]);
          r.mean_height = sum / static_cast<double>(prof.total());
          for (double x : c.x_grid) {
            const double hi = std::isinf(c.band_y) ? c.band_y : g * std::exp(c.band_y) * logn;
            r.counts.push_back(prof.band(g * std::exp(x) * logn, hi));
          }
        }
        return r;
      },
      [](const Rec& r) { return r.survived; });

  ExperimentResult out;
  out.records.columns = {"replica", "survived", "actives", "mean_active_height"};
  for (double x : c.x_grid) {
    out.records.columns.push_back("count_" + detail::tag(x));
    out.records.columns.push_back("exponent_" + detail::tag(x));
  }
  std::vector<Aggregator> expo(c.x_grid.size());
  std::vector<std::int64_t> empty(c.x_grid.size(), 0);
  Aggregator mean_height;
  std::int64_t survivors = 0;
  for (const auto& r : recs) {
    std::vector<Value> row{r.id, r.survived, r.actives};
    row.push_back(r.survived ? Value(r.mean_height) : Value(std::monostate{}));
    if (r.survived) mean_height.add(static_cast<std::uint64_t>(r.id), r.mean_height / logn);
    for (std::size_t i = 0; i < c.x_grid.size(); ++i) {
      if (r.survived) {
        // An empty band gives log 0 = -inf, kept as is.
        const double e = std::log(static_cast<double>(r.counts[i])) / logn;
        row.emplace_back(r.counts[i]);
        row.emplace_back(e);
        expo[i].add(static_cast<std::uint64_t>(r.id), e);
        empty[i] += r.counts[i] == 0;
      } else {
        row.emplace_back(std::monostate{});
        row.emplace_back(std::monostate{});
      }
    }
    survivors += r.survived;
    out.records.add_row(std::move(row));
  }
  auto& s = out.summary = detail::base_summary(c);
  s["lambda"] = c.lambda;
  s["n"] = c.n;
  s["t"] = c.t;
  s["runs"] = static_cast<std::int64_t>(recs.size());
  s["survivors"] = survivors;
  s["log_log_correction"] = -std::log(logn) / (2.0 * logn);
  s["gamma"] = g;
  s["mean_active_height_over_log_n"] = to_json(mean_height.summarize());
  detail::json bands = detail::json::array();
  for (std::size_t i = 0; i < c.x_grid.size(); ++i) {
    const auto sum = expo[i].summarize();
    detail::json b;
    b["x"] = c.x_grid[i];
    b["f_lambda"] = f_lambda(c.lambda, c.x_grid[i]);
    b["exponent"] = to_json(sum);
    b["mean_minus_f"] = sum.mean - f_lambda(c.lambda, c.x_grid[i]);
    b["empty_band_runs"] = empty[i];
    bands.push_back(b);
  }
  s["bands"] = bands;
  return out;
}

inline ExperimentResult run_dangling(const ExperimentConfig& c) {
  validate(c);
  const std::int64_t k0 = detail::floor_steps((1.0 - c.delta) * t_lambda(c.lambda), c.n);
  const std::int64_t horizon = default_horizon(c.n);
  const double logn = std::log(static_cast<double>(c.n));
  const double g = gamma_of(c.lambda);
  constexpr auto kNone = std::numeric_limits<std::uint32_t>::max();
  struct Rec {
    std::int64_t id = 0;
    bool survived = false;
    std::int64_t snapshot_height = 0;
    std::int64_t total_height = 0;
    std::int64_t snapshot_actives = 0;
    std::int64_t top_active_height = 0;
    std::int64_t argmax_height = 0;
    std::int64_t argmax_dangling = 0;
    std::int64_t max_dangling = 0;
    std::vector<std::int64_t> band_dangling;  // max dangling height per x band, -1 if empty
  };
  auto recs = detail::collect<Rec>(
      c,
      [&](std::int64_t id) {
        detail::SirTreeRun run(c, static_cast<std::uint64_t>(id));
        run.run_until(k0);
        Rec r;
        r.id = id;
        r.survived = run.steps() == k0 && run.alive();
        if (!r.survived) {
          run.run_until(horizon);
          r.total_height = r.snapshot_height = run.tree().height();
          return r;
        }
        const Tree& tree = run.tree();
        r.snapshot_height = tree.height();
        r.snapshot_actives = static_cast<std::int64_t>(tree.active_count());
        // Each vertex born after the snapshot inherits the snapshot vertex it
        // descends from; depth[u] is the height of u's dangling tree.
        std::vector<std::uint32_t> anchor(tree.node_count(), kNone);
        std::vector<std::uint32_t> snapshot_vertices;
        tree.for_each_active([&](auto v) {
          anchor[v] = v;
          snapshot_vertices.push_back(v);
        });
        std::vector<std::uint32_t> depth(tree.node_count(), 0);
        while (run.alive() && run.steps() < horizon) {
          const auto rec = run.step();
          if (rec.child) {
            const std::uint32_t a = anchor[*rec.vertex];
            anchor.push_back(a);
            if (a != kNone) depth[a] = std::max(depth[a], tree.height_of(*rec.child) - tree.height_of(a));
          }
        }
        run.check_bookkeeping();
        r.total_height = tree.height();
        r.band_dangling.assign(c.x_grid.size(), -1);
        std::int64_t best = -1;
        for (auto u : snapshot_vertices) {
          const std::int64_t h = tree.height_of(u);
          const std::int64_t d = depth[u];
          r.top_active_height = std::max(r.top_active_height, h);
          r.max_dangling = std::max(r.max_dangling, d);
          // Ties go to the higher snapshot vertex.
          if (h + d > best || (h + d == best && h > r.argmax_height)) {
            best = h + d;
            r.argmax_height = h;
            r.argmax_dangling = d;
          }
          for (std::size_t i = 0; i < c.x_grid.size(); ++i) {
            const double lo = g * std::exp(c.x_grid[i]) * logn;
            const double hi = std::isinf(c.band_y) ? c.band_y : g * std::exp(c.band_y) * logn;
            if (static_cast<double>(h) >= lo && static_cast<double>(h) <= hi) {
              r.band_dangling[i] = std::max(r.band_dangling[i], d);
            }
          }
        }
        return r;
      },
      [](const Rec& r) { return r.survived; });

  ExperimentResult out;
  out.records.columns = {"replica",          "survived",       "snapshot_height", "total_height",
                         "snapshot_actives", "top_active_height", "argmax_height", "argmax_dangling",
                         "argmax_s",         "argmax_gap",     "max_dangling"};
  for (double x : c.x_grid) out.records.columns.push_back("dangling_" + detail::tag(x));
  Aggregator snap;
  Aggregator total;
  Aggregator arg_s;
  std::vector<Aggregator> band(c.x_grid.size());
  std::int64_t survivors = 0;
  std::int64_t interior = 0;
  std::int64_t snapshot_dominated = 0;
  for (const auto& r : recs) {
    std::vector<Value> row{r.id, r.survived, r.snapshot_height, r.total_height};
    if (!r.survived) {
      for (std::size_t i = 4; i < out.records.columns.size(); ++i) row.emplace_back(std::monostate{});
      out.records.add_row(std::move(row));
      continue;
    }
    ++survivors;
    const double s_arg =
        r.argmax_height > 0 ? std::log(static_cast<double>(r.argmax_height) / (g * logn)) : -std::numeric_limits<double>::infinity();
    const std::int64_t gap = r.top_active_height - r.argmax_height;
    row.insert(row.end(), {r.snapshot_actives, r.top_active_height, r.argmax_height, r.argmax_dangling, s_arg, gap,
                           r.max_dangling});
    for (std::size_t i = 0; i < c.x_grid.size(); ++i) {
      row.emplace_back(r.band_dangling[i]);
      if (r.band_dangling[i] >= 0) band[i].add(static_cast<std::uint64_t>(r.id), static_cast<double>(r.band_dangling[i]) / logn);
    }
    out.records.add_row(std::move(row));
    const auto id = static_cast<std::uint64_t>(r.id);
    snap.add(id, static_cast<double>(r.snapshot_height) / logn);
    total.add(id, static_cast<double>(r.total_height) / logn);
    arg_s.add(id, s_arg);
    interior += gap > 0;
    snapshot_dominated +=
        static_cast<double>(r.total_height - r.snapshot_height) <= 0.15 * static_cast<double>(r.snapshot_height);
  }
  const double m = m_lambda(c.lambda);
  const double z = z_lambda(c.lambda);
  auto& s = out.summary = detail::base_summary(c);
  s["lambda"] = c.lambda;
  s["n"] = c.n;
  s["delta"] = c.delta;
  s["snapshot_step"] = k0;
  s["runs"] = static_cast<std::int64_t>(recs.size());
  s["survivors"] = survivors;
  s["regime"] = std::string(to_string(TheoryConstants::at(c.lambda).regime));
  s["snapshot_height_over_log_n"] = to_json(snap.summarize());
  s["snapshot_limit"] = g * std::exp(z);
  s["total_height_over_log_n"] = to_json(total.summarize());
  s["kappa"] = kappa(c.lambda);
  s["argmax_s"] = to_json(arg_s.summarize());
  s["argmax_s_predicted"] = c.lambda < lambda_c() ? std::min(-std::log(m), z) : z;
  s["interior_argmax_fraction"] = survivors ? static_cast<double>(interior) / static_cast<double>(survivors) : detail::nan();
  s["snapshot_dominated_fraction"] =
      survivors ? static_cast<double>(snapshot_dominated) / static_cast<double>(survivors) : detail::nan();
  detail::json bands = detail::json::array();
  for (std::size_t i = 0; i < c.x_grid.size(); ++i) {
    detail::json b;
    b["x"] = c.x_grid[i];
    b["h_lambda"] = h_lambda(c.lambda, c.x_grid[i]);
    b["max_dangling_over_log_n"] = to_json(band[i].summarize());
    bands.push_back(b);
  }
  s["bands"] = bands;
  return out;
}

inline ExperimentResult run_martingale_check(const ExperimentConfig& c) {
  validate(c);
  const std::int64_t K = detail::floor_steps(c.t, c.n);
  const double lambda_n = c.lambda / static_cast<double>(c.n);
  // The shared trace: the first surviving run of a dedicated stream family.
  const std::uint64_t trace_master = mix_seed(c.seed, 0x5452414345ULL);
  std::optional<InfectionTrace> trace;
  std::int64_t trace_index = 0;
  for (; trace_index < 10'000 && !trace; ++trace_index) {
    auto rng = RngStream::for_replica(trace_master, static_cast<std::uint64_t>(trace_index), StreamRole::kSigns);
    auto tr = simulate_sir(c.n, lambda_n, K, rng);
    if (tr.length() == K && tr.walk.back() > 0) trace = std::move(tr);
  }
  if (!trace) throw CapacityError("martingale-check: no surviving trace found in 10^4 attempts");
  const auto& walk = trace->walk;
  const std::int64_t J = *compute_J(walk, c.lambda, K);
  const std::vector<std::pair<std::string, std::int64_t>> checkpoints{
      {"J", std::min(J, K)}, {"2J", std::min(2 * J, K)}, {"K", K}};

  const std::size_t nz = c.z_list.size();
  const std::size_t nc = checkpoints.size();
  std::vector<std::vector<Complex>> L(static_cast<std::size_t>(c.replicas));
  parallel_for(c.replicas, c.threads, [&](std::int64_t id) {
    auto choices = RngStream::for_replica(c.seed, static_cast<std::uint64_t>(id), StreamRole::kChoices);
    Tree tree(1, static_cast<std::size_t>(K) + 2);
    auto& out = L[static_cast<std::size_t>(id)];
    out.resize(nz * nc);
    for (std::int64_t k = 0; k <= K; ++k) {
      if (k > 0) tree.grow_step(trace->steps[static_cast<std::size_t>(k - 1)], choices);
      for (std::size_t ci = 0; ci < nc; ++ci) {
        if (checkpoints[ci].second != k) continue;
        for (std::size_t zi = 0; zi < nz; ++zi) out[zi * nc + ci] = laplace_transform(tree, c.z_list[zi]);
      }
    }
  });

  // E[L(z, T_k)] = Π_{i<=k} (1 + (e^z - 1) 1{X_i = 1} / S_i) exactly, and
  // C^n_k is the same product restricted to i > J.
  auto product = [&](Complex z, std::int64_t from, std::int64_t to) {
    Complex p = 1.0;
    const Complex ez1 = std::exp(z) - 1.0;
    for (std::int64_t i = from + 1; i <= to; ++i) {
      if (trace->steps[static_cast<std::size_t>(i - 1)] > 0) p *= 1.0 + ez1 / static_cast<double>(walk[static_cast<std::size_t>(i)]);
    }
    return p;
  };

  ExperimentResult out;
  out.records.columns = {"replica", "z_re", "z_im", "checkpoint", "k", "L_re", "L_im", "M_re", "M_im"};
  for (std::int64_t id = 0; id < c.replicas; ++id) {
    for (std::size_t zi = 0; zi < nz; ++zi) {
      for (std::size_t ci = 0; ci < nc; ++ci) {
        const Complex l = L[static_cast<std::size_t>(id)][zi * nc + ci];
        const Complex m = l / product(c.z_list[zi], J, checkpoints[ci].second);
        out.records.add_row({id, c.z_list[zi].real(), c.z_list[zi].imag(), checkpoints[ci].first,
                             checkpoints[ci].second, l.real(), l.imag(), m.real(), m.imag()});
      }
    }
  }

  auto& s = out.summary = detail::base_summary(c);
  s["lambda"] = c.lambda;
  s["n"] = c.n;
  s["K"] = K;
  s["J"] = J;
  s["trace_index"] = trace_index - 1;
  s["replicas"] = c.replicas;
  detail::json per_z = detail::json::array();
  bool all_ok = true;
  double worst_one_step = 0.0;
  for (std::size_t zi = 0; zi < nz; ++zi) {
    const Complex z = c.z_list[zi];
    detail::json zj;
    zj["z"] = {z.real(), z.imag()};
    // Exact one-step identity along the replica-0 path.
    {
      auto choices = RngStream::for_replica(c.seed, 0, StreamRole::kChoices);
      Tree tree(1, static_cast<std::size_t>(K) + 2);
      double worst = 0.0;
      double min_factor = std::numeric_limits<double>::infinity();
      for (std::int64_t k = 0; k < K; ++k) {
        const std::int8_t x = trace->steps[static_cast<std::size_t>(k)];
        const auto chk = one_step_expectation_check(tree, x, z);
        worst = std::max(worst, chk.residual / (1.0 + std::abs(chk.rhs)));
        if (k + 1 > J && x > 0) {
          min_factor = std::min(min_factor, std::abs(1.0 + (std::exp(z) - 1.0) / static_cast<double>(walk[static_cast<std::size_t>(k + 1)])));
        }
        tree.grow_step(x, choices);
      }
      zj["one_step_max_scaled_residual"] = worst;
      zj["min_factor_modulus_after_J"] = std::isinf(min_factor) ? detail::json(nullptr) : detail::json(min_factor);
      worst_one_step = std::max(worst_one_step, worst);
    }
    detail::json cps = detail::json::array();
    for (std::size_t ci = 0; ci < nc; ++ci) {
      Aggregator re;
      Aggregator im;
      for (std::int64_t id = 0; id < c.replicas; ++id) {
        const Complex l = L[static_cast<std::size_t>(id)][zi * nc + ci];
        re.add(static_cast<std::uint64_t>(id), l.real());
        im.add(static_cast<std::uint64_t>(id), l.imag());
      }
      const auto sr = re.summarize();
      const auto si = im.summarize();
      const Complex exact = product(z, 0, checkpoints[ci].second);
      const double tol = 1e-12 * (1.0 + std::abs(exact));
      const bool ok_re = std::abs(sr.mean - exact.real()) <= 3.0 * sr.standard_error() + tol;
      const bool ok_im = std::abs(si.mean - exact.imag()) <= 3.0 * si.standard_error() + tol;
      all_ok = all_ok && ok_re && ok_im;
      detail::json cj;
      cj["checkpoint"] = checkpoints[ci].first;
      cj["k"] = checkpoints[ci].second;
      cj["mean"] = {sr.mean, si.mean};
      cj["se"] = {sr.standard_error(), si.standard_error()};
      cj["exact"] = {exact.real(), exact.imag()};
      cj["C_n"] = {product(z, J, checkpoints[ci].second).real(), product(z, J, checkpoints[ci].second).imag()};
      cj["within_3se"] = ok_re && ok_im;
      cps.push_back(cj);
    }
    zj["checkpoints"] = cps;
    per_z.push_back(zj);
  }
  s["z"] = per_z;
  s["one_step_max_scaled_residual"] = worst_one_step;
  s["ensemble_within_3se"] = all_ok;
  return out;
}

inline ExperimentResult run_coupling_demo(const ExperimentConfig& c) {
  validate(c);
  struct Rec {
    std::int64_t id = 0;
    bool event_E = false;
    bool nested = false;
    std::int64_t failures = 0;
    bool decoupled = false;
    std::int64_t sizes[3] = {0, 0, 0};
    std::vector<std::int64_t> roots[3];
  };
  using SC = SandwichCoupling;
  std::vector<Rec> recs(static_cast<std::size_t>(c.replicas));
  const auto r_of = constant_freeze(c.r);
  parallel_for(c.replicas, c.threads, [&](std::int64_t id) {
    auto rng = RngStream::for_replica(c.seed, static_cast<std::uint64_t>(id), StreamRole::kAux);
    const auto sc = sandwich_coupling(static_cast<std::size_t>(c.roots), c.p, c.q, r_of, rng);
    Rec r;
    r.id = id;
    r.event_E = sc.event_E;
    r.nested = sc.nested();
    r.failures = sc.inclusion_failures;
    r.decoupled = sc.decoupled_at.has_value();
    for (auto f : {SC::kLower, SC::kMiddle, SC::kUpper}) {
      r.sizes[f] = sc.forest_size(f);
      r.roots[f] = root_offspring(sc, f);
    }
    recs[static_cast<std::size_t>(id)] = std::move(r);
  });

  ExperimentResult out;
  out.records.columns = {"replica",   "event_E",    "nested",      "inclusion_failures",
                         "decoupled", "lower_size", "middle_size", "upper_size"};
  std::int64_t on_E = 0;
  std::int64_t nested_on_E = 0;
  std::vector<std::int64_t> samples[3];
  for (const auto& r : recs) {
    out.records.add_row({r.id, r.event_E, r.nested, r.failures, r.decoupled, r.sizes[0], r.sizes[1], r.sizes[2]});
    if (r.event_E) {
      ++on_E;
      nested_on_E += r.nested && r.failures == 0;
    }
    for (int f = 0; f < 3; ++f) samples[f].insert(samples[f].end(), r.roots[f].begin(), r.roots[f].end());
  }
  auto chi = [&](int f, double s) {
    const GeomOffspring law(s);
    const auto t = stats::chi_square_test(samples[f], [&](std::int64_t k) { return law.pmf(k); });
    detail::json j;
    j["law_s"] = s;
    j["samples"] = static_cast<std::int64_t>(samples[f].size());
    j["statistic"] = t.statistic;
    j["dof"] = t.dof;
    j["p_value"] = t.p_value;
    return j;
  };
  auto& s = out.summary = detail::base_summary(c);
  s["roots"] = c.roots;
  s["p"] = c.p;
  s["q"] = c.q;
  s["r"] = c.r;
  s["runs"] = c.replicas;
  s["event_E_runs"] = on_E;
  s["nested_on_event_E"] = nested_on_E;
  s["inclusions_hold"] = nested_on_E == on_E;
  s["upper_vs_G_p"] = chi(SC::kUpper, c.p);
  s["lower_vs_G_q"] = chi(SC::kLower, c.q);
  s["middle_vs_G_r"] = chi(SC::kMiddle, c.r);
  return out;
}

// Replacement sequence of a preset urn, X_1..X_k.
inline std::vector<std::int64_t> preset_sequence(UrnPreset p, std::int64_t k) {
  std::vector<std::int64_t> X(static_cast<std::size_t>(k), 1);
  if (p == UrnPreset::kAlternating) {
    for (std::size_t i = 1; i < X.size(); i += 2) X[i] = -1;
  }
  return X;
}

inline ExperimentResult run_urn(const ExperimentConfig& c) {
  validate(c);
  struct Rec {
    std::int64_t id = 0;
    bool valid = false;
    std::int64_t k = 0;
    std::int64_t R = 0;
    std::int64_t s = 0;
    double draw_frequency = 0.0;
  };
  std::vector<Rec> recs(static_cast<std::size_t>(c.replicas));
  if (c.preset == UrnPreset::kFromTree) {
    // Colours are the subtrees of the two vertices active when the walk first
    // reaches 2; red is the older one.
    const std::int64_t horizon = default_horizon(c.n);
    parallel_for(c.replicas, c.threads, [&](std::int64_t id) {
      detail::SirTreeRun run(c, static_cast<std::uint64_t>(id));
      while (run.alive() && run.infectious() != 2 && run.steps() < horizon) run.step();
      Rec r;
      r.id = id;
      if (run.infectious() == 2) {
        const Tree& tree = run.tree();
        std::vector<std::int8_t> colour(tree.node_count(), -1);
        std::vector<Tree::Index> pair;
        tree.for_each_active([&](auto v) { pair.push_back(v); });
        std::sort(pair.begin(), pair.end());
        colour[pair[0]] = 1;
        colour[pair[1]] = 0;
        std::int64_t R = 1;
        std::int64_t drawn_red = 0;
        std::int64_t k = 0;
        // Once one ball is left its colour is final.
        while (k < c.k && run.infectious() >= 2) {
          const auto rec = run.step();
          ++k;
          const bool red = colour[*rec.vertex] == 1;
          drawn_red += red;
          if (rec.child) {
            colour.push_back(colour[*rec.vertex]);
            R += red;
          } else {
            R -= red;
          }
        }
        r.valid = true;
        r.k = k;
        r.R = R;
        r.s = run.infectious();
        r.draw_frequency = k ? static_cast<double>(drawn_red) / static_cast<double>(k) : 0.0;
      }
      recs[static_cast<std::size_t>(id)] = r;
    });
  } else {
    const auto X = preset_sequence(c.preset, c.k);
    parallel_for(c.replicas, c.threads, [&](std::int64_t id) {
      auto rng = RngStream::for_replica(c.seed, static_cast<std::uint64_t>(id), StreamRole::kAux);
      const auto tr = proportion_run(1, 1, X, rng);
      const auto k = static_cast<std::size_t>(c.k);
      recs[static_cast<std::size_t>(id)] = Rec{id, true, c.k, tr.R[k], tr.s[k], tr.draw_frequency(k)};
    });
  }

  ExperimentResult out;
  out.records.columns = {"replica", "k", "R", "s", "proportion"};
  std::vector<double> props;
  std::int64_t interior = 0;
  std::int64_t agree = 0;
  for (const auto& r : recs) {
    if (!r.valid) continue;
    const double p = static_cast<double>(r.R) / static_cast<double>(r.s);
    out.records.add_row({r.id, r.k, r.R, r.s, p});
    props.push_back(p);
    interior += p > 0.05 && p < 0.95;
    agree += std::abs(p - r.draw_frequency) < 0.05;
  }
  auto& s = out.summary = detail::base_summary(c);
  s["preset"] = std::string(to_string(c.preset));
  s["k"] = c.k;
  s["runs"] = c.replicas;
  s["valid_runs"] = static_cast<std::int64_t>(props.size());
  const double nv = static_cast<double>(props.size());
  s["interior_fraction"] = props.empty() ? detail::nan() : static_cast<double>(interior) / nv;
  s["draw_frequency_agreement"] = props.empty() ? detail::nan() : static_cast<double>(agree) / nv;
  if (c.preset != UrnPreset::kFromTree) {
    XDescriptor d;
    d.tail = PeriodicTail{c.preset == UrnPreset::kPolya ? std::vector<std::int64_t>{1} : std::vector<std::int64_t>{1, -1}};
    s["criterion"] = std::string(to_string(bernoulli_criterion(d, 2).verdict));
    if (!props.empty()) s["ks_uniform"] = stats::ks_distance_uniform(props);
  }
  return out;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  switch (c.kind) {
    case ExperimentKind::kHeight:
      return run_height(c);
    case ExperimentKind::kProfile:
      return run_profile(c);
    case ExperimentKind::kFluid:
      return run_fluid(c);
    case ExperimentKind::kDangling:
      return run_dangling(c);
    case ExperimentKind::kSurvival:
      return run_survival(c);
    case ExperimentKind::kMartingaleCheck:
      return run_martingale_check(c);
    case ExperimentKind::kCouplingDemo:
      return run_coupling_demo(c);
    case ExperimentKind::kUrn:
      return run_urn(c);
  }
  throw ConfigError("unknown experiment kind");
}

}  // namespace sirtree::harness

#endif  // SIRTREE_HARNESS_EXPERIMENTS_HPP_
