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


// Acceptance run: one [PASS]/[FAIL] line per criterion, each with its
// runtime budget. The exit status reports crashes only; the verdicts are in
// the output and in the --report file.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "sirtree.hpp"
#include "sirtree/harness/experiments.hpp"

namespace {

using namespace sirtree;
using harness::ExperimentConfig;
using harness::ExperimentKind;

struct Verdict {
  bool ok = true;
  std::ostringstream detail;
  std::vector<std::string> failed;

  void check(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      failed.push_back(what);
    }
  }
};

struct Criterion {
  std::string name;
  double budget_s;
  std::function<void(Verdict&)> body;
};

int worker_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

void check_lambert(Verdict& v) {
  constexpr std::size_t kPoints = 10'000;
  const auto r = verify_residual(kPoints);
  const auto b = verify_branch_bound(kPoints);
  const auto l = verify_lambda_bound(kPoints);
  const auto s = verify_series_bounds(kPoints);
  const auto i2 = verify_input2(kPoints);
  v.detail << "residual max " << fmt(r.max_scaled_residual) << ", violations " << r.violations << "/" << b.violations
           << "/" << l.violations << "/" << s.violations << "/" << i2.violations;
  v.check(r.points == kPoints && r.violations == 0, "residual");
  v.check(b.violations == 0, "branch bound");
  v.check(l.violations == 0, "lambda bound");
  v.check(s.violations == 0, "series bounds");
  v.check(i2.violations == 0, "second series bound");
}

void check_critical_rate(Verdict& v) {
  const double lc = lambda_c();
  const double f = f_lambda(lc, -std::log(m_lambda(lc)));
  const double gap = std::abs(kappa_left(lc) - kappa_right(lc));
  v.detail << "lambda_c " << fmt(lc, 10) << ", |f(-log m)| " << fmt(std::abs(f)) << ", branch gap " << fmt(gap);
  v.check(std::abs(lc - 1.8038) <= 5e-4, "lambda_c");
  v.check(std::abs(f) <= 1e-7, "f at -log m");
  v.check(gap <= 1e-8, "branches");
}

void check_identities(Verdict& v) {
  double worst[5] = {0, 0, 0, 0, 0};
  constexpr int kGrid = 100;
  for (int i = 0; i < kGrid; ++i) {
    const double lambda = 1.05 + (10.0 - 1.05) * (i + 1) / kGrid;
    const double m = m_lambda(lambda);
    const double t = t_lambda(lambda);
    worst[0] = std::max(worst[0], std::abs(m * std::exp(-m) - lambda * std::exp(-lambda)));
    worst[1] = std::max(worst[1], std::abs(fluid_curve(lambda, t)));
    worst[2] = std::max(worst[2], std::abs(m - lambda * g_lambda(lambda, t)));
    const double g = gamma_of(lambda);
    const double x = z_lambda(lambda) * (i + 0.5) / kGrid;
    worst[3] = std::max(worst[3], std::abs(-legendre_F(lambda, g * std::exp(x)) - (f_lambda(lambda, x) - 1.0)));
    worst[4] = std::max(worst[4], std::abs(kappa_sup(lambda).value - kappa(lambda)));
  }
  const char* names[] = {"m e^-m", "t root", "m = lambda g(t)", "Legendre", "sup form"};
  for (int k = 0; k < 5; ++k) {
    v.detail << (k ? ", " : "") << names[k] << " " << fmt(worst[k], 2);
    v.check(worst[k] <= 1e-8, names[k]);
  }
}

void check_survival(Verdict& v) {
  for (double lambda : {1.5, 2.0, 3.0}) {
    ExperimentConfig c;
    c.kind = ExperimentKind::kSurvival;
    c.lambda = lambda;
    c.n = 100'000;
    c.replicas = 2000;
    c.survival_fraction = 0.5;
    c.threads = worker_threads();
    const auto r = harness::run_experiment(c);
    const auto& b = r.summary["survival"];
    v.detail << "lambda " << lambda << ": " << fmt(b["rate"].get<double>()) << " vs " << fmt(b["expected"].get<double>())
             << " +- " << fmt(b["band_3se"].get<double>(), 3) << "; ";
    v.check(b["within_band"].get<bool>(), "lambda " + fmt(lambda));
  }
}

void check_fluid(Verdict& v) {
  ExperimentConfig c;
  c.kind = ExperimentKind::kFluid;
  c.lambda = 2.0;
  c.n = 1'000'000;
  c.t = 1.2;
  c.replicas = 1000;
  c.survivors = 50;
  c.threads = worker_threads();
  const auto r = harness::run_experiment(c);
  const auto survivors = r.summary["survivors"].get<std::int64_t>();
  const double frac = r.summary["fraction_within_tolerance"].get<double>();
  v.detail << survivors << " survivors, within 0.02: " << fmt(frac) << ", max deviation "
           << fmt(r.summary["deviation"]["max"].get<double>());
  v.check(survivors == 50, "survivor count");
  v.check(frac >= 0.9, "fraction");
}

void check_profile(Verdict& v) {
  ExperimentConfig c;
  c.kind = ExperimentKind::kProfile;
  c.lambda = 2.0;
  c.n = 1'000'000;
  c.t = 1.0;
  c.x_grid = {0.2, 0.4, 0.6};
  c.replicas = 2000;
  c.survivors = 100;
  c.threads = worker_threads();
  const auto r = harness::run_experiment(c);
  v.check(r.summary["survivors"].get<std::int64_t>() == 100, "survivor count");
  for (const auto& b : r.summary["bands"]) {
    const double x = b["x"].get<double>();
    const double mean = b["exponent"]["mean"].get<double>();
    const double f = b["f_lambda"].get<double>();
    v.detail << "x " << x << ": mean " << fmt(mean) << ", median " << fmt(b["exponent"]["median"].get<double>())
             << " vs " << fmt(f) << ", empty in " << b["empty_band_runs"] << " runs; ";
    v.check(std::abs(mean - f) <= 0.15, "x " + fmt(x));
  }
}

void check_height(Verdict& v) {
  for (double lambda : {1.5, 2.0, 5.0}) {
    const double k = kappa(lambda);
    std::vector<double> gaps;
    v.detail << "lambda " << lambda << " (kappa " << fmt(k) << "):";
    for (std::int64_t n : {10'000, 100'000, 1'000'000}) {
      ExperimentConfig c;
      c.kind = ExperimentKind::kHeight;
      c.lambda = lambda;
      c.n = n;
      c.replicas = 5000;
      c.survivors = 200;
      c.threads = worker_threads();
      const auto r = harness::run_experiment(c);
      v.check(r.summary["survivors"].get<std::int64_t>() == 200, "survivor count");
      const double med = r.summary["height_over_log_n_given_survival"]["median"].get<double>();
      v.detail << " " << fmt(med);
      gaps.push_back(std::abs(k - med));
    }
    v.detail << "; ";
    v.check(gaps[0] > gaps[1] && gaps[1] > gaps[2], "monotone " + fmt(lambda));
    v.check(gaps[2] <= 1.25, "band " + fmt(lambda));
  }
  auto dangling = [](double lambda) {
    ExperimentConfig c;
    c.kind = ExperimentKind::kDangling;
    c.lambda = lambda;
    c.n = 100'000;
    c.replicas = 2000;
    c.survivors = 100;
    c.threads = worker_threads();
    return harness::run_experiment(c).summary;
  };
  const auto lo = dangling(1.5);
  const auto hi = dangling(5.0);
  const double lo_interior = lo["interior_argmax_fraction"].get<double>();
  const double hi_interior = hi["interior_argmax_fraction"].get<double>();
  const double hi_snapshot = hi["snapshot_dominated_fraction"].get<double>();
  v.detail << "dangling interior 1.5: " << fmt(lo_interior) << ", 5: " << fmt(hi_interior)
           << ", snapshot-dominated 5: " << fmt(hi_snapshot);
  v.check(lo_interior > 0.5, "interior argmax below lambda_c");
  v.check(hi_interior < 0.1 && hi_snapshot >= 0.9, "snapshot argmax above lambda_c");
}

std::vector<std::int8_t> positive_signs(std::size_t len, RngStream& rng) {
  std::vector<std::int8_t> x;
  std::int64_t s = 1;
  while (x.size() < len) {
    const std::int8_t step = (rng.uniform() < 0.6 || s == 1) ? 1 : -1;
    s += step;
    x.push_back(step);
  }
  return x;
}

void check_exact_identities(Verdict& v) {
  RngStream rng(20260);
  // One-step conditional mean: product form against enumeration over copies.
  double one_step = 0.0;
  for (int i = 0; i < 10'000; ++i) {
    const auto x = positive_signs(1 + rng.index<std::size_t>(40), rng);
    auto choice = RngStream::for_replica(20261, static_cast<std::uint64_t>(i), StreamRole::kChoices);
    const auto t = build_from_signs(std::span<const std::int8_t>(x), 1, choice);
    const Complex z(-1.0 + 2.0 * rng.uniform(), -3.0 + 6.0 * rng.uniform());
    const int sign = t.active_count() < 2 || rng.uniform() < 0.5 ? 1 : -1;
    const auto chk = one_step_expectation_check(t, sign, z);
    Complex brute = 0.0;
    for (std::size_t a = 0; a < t.active_count(); ++a) {
      Tree copy = t;
      copy.apply(t.nth_active(a), sign);
      Complex sum = 0.0;
      copy.for_each_active([&](auto u) { sum += std::exp(z * static_cast<double>(copy.height_of(u))); });
      brute += sum / static_cast<double>(copy.active_count());
    }
    brute /= static_cast<double>(t.active_count());
    const double scale = 1.0 + std::abs(chk.rhs);
    one_step = std::max({one_step, chk.residual / scale, std::abs(brute - chk.rhs) / scale});
  }
  // Fourier inversion against the direct profile.
  double fourier = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = positive_signs(1 + rng.index<std::size_t>(300), rng);
    auto choice = RngStream::for_replica(20262, static_cast<std::uint64_t>(i), StreamRole::kChoices);
    const auto t = build_from_signs(std::span<const std::int8_t>(x), 1, choice);
    const auto p = active_profile(t);
    const double h = -0.5 + rng.uniform();
    for (std::int64_t k = 0; k <= p.max_height() + 1; ++k) {
      const double want = static_cast<double>(p.at(k)) / static_cast<double>(p.total());
      fourier = std::max(fourier, std::abs(fourier_invert(t, h, k) - want));
    }
  }
  // Urn one-step martingale and moment recursion.
  double urn = 0.0;
  for (int i = 0; i < 10'000; ++i) {
    const auto s = 2 + static_cast<std::int64_t>(rng.index<std::uint64_t>(10'000));
    const auto R = static_cast<std::int64_t>(rng.index<std::uint64_t>(static_cast<std::uint64_t>(s) + 1));
    const auto x = static_cast<std::int64_t>(rng.index<std::uint64_t>(12)) - 1;
    urn = std::max(urn, urn_martingale_check(UrnState{R, s}, x).residual);
  }
  double moments = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::int64_t r0 = 1 + static_cast<std::int64_t>(rng.index<std::uint64_t>(5));
    const std::int64_t b0 = 1 + static_cast<std::int64_t>(rng.index<std::uint64_t>(5));
    std::vector<std::int64_t> X;
    std::int64_t s = r0 + b0;
    while (X.size() < 1000) {
      std::int64_t step = static_cast<std::int64_t>(rng.index<std::uint64_t>(5)) - 1;
      if (s + step < 2) step = 1;
      s += step;
      X.push_back(step);
    }
    const auto a = moment_recursion(r0, b0, X, X.size());
    const auto b = moment_closed_form(r0, b0, X, X.size());
    for (std::size_t k = 0; k < a.size(); ++k) moments = std::max(moments, std::abs(a[k] - b[k]));
  }
  // Harris closed form against the pgf iteration, both P(Height >= n).
  double harris = 0.0;
  for (int i = 1; i < 100; ++i) {
    const double r = 0.5 + 0.5 * i / 100.0;
    for (std::int64_t n = 0; n <= 200; ++n)
      harris = std::max(harris, std::abs(harris_height_tail(r, n) - harris_dp_tail(r, n)));
  }
  v.detail << "one-step " << fmt(one_step, 2) << ", Fourier " << fmt(fourier, 2) << ", urn " << fmt(urn, 2)
           << ", moments " << fmt(moments, 2) << ", Harris " << fmt(harris, 2);
  v.check(one_step <= 1e-12, "one-step");
  v.check(fourier <= 1e-10, "Fourier");
  v.check(urn <= 1e-14, "urn martingale");
  v.check(moments <= 1e-14, "moment recursion");
  v.check(harris <= 1e-12, "Harris");
}

void check_coupling(Verdict& v) {
  std::int64_t bad = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    auto rng = RngStream::for_replica(777, i, StreamRole::kAux);
    const auto sc = sandwich_coupling(5, 0.6, 0.8, constant_freeze(0.7), rng);
    bad += !(sc.event_E && sc.nested() && sc.inclusion_failures == 0);
  }
  ExperimentConfig c;
  c.kind = ExperimentKind::kCouplingDemo;
  c.roots = 5;
  c.p = 0.6;
  c.q = 0.8;
  c.r = 0.7;
  c.replicas = 20'000;
  c.threads = worker_threads();
  const auto r = harness::run_experiment(c);
  const auto& up = r.summary["upper_vs_G_p"];
  const auto& low = r.summary["lower_vs_G_q"];
  v.detail << "inclusion failures " << bad << "/1000, chi2 p upper " << fmt(up["p_value"].get<double>(), 3) << " lower "
           << fmt(low["p_value"].get<double>(), 3) << " on " << up["samples"] << " samples";
  v.check(bad == 0, "inclusions");
  v.check(up["samples"].get<std::int64_t>() >= 100'000 && low["samples"].get<std::int64_t>() >= 100'000, "sample size");
  v.check(up["p_value"].get<double>() > 0.01, "upper chi2");
  v.check(low["p_value"].get<double>() > 0.01, "lower chi2");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void check_determinism(Verdict& v) {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "sirtree_acceptance_determinism";
  fs::remove_all(dir);
  auto run = [&](const std::string& tag, int threads) {
    const std::string cmd = std::string(SIRTREE_CLI_PATH) +
                            " sim-height --lambda 2 --n 10000 --replicas 200 --seed 42 --threads " +
                            std::to_string(threads) + " --out " + (dir / tag).string() + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) && WEXITSTATUS(status) == 0;
  };
  v.check(run("t1", 1) && run("t1b", 1) && run("t8", 8), "cli run");
  const auto a = slurp(dir / "t1" / "records.csv");
  v.check(!a.empty(), "records written");
  v.check(a == slurp(dir / "t1b" / "records.csv"), "repeat");
  v.check(a == slurp(dir / "t8" / "records.csv"), "threads 1 vs 8");
  v.detail << a.size() << " bytes compared";
  fs::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sirtree acceptance run"};
  std::string report;
  std::vector<std::string> only;
  app.add_option("--report", report, "Also write the verdict lines here");
  app.add_option("--only", only, "Run only criteria whose name contains one of these");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"lambert-w", 1.0, check_lambert},
      {"critical-rate", 1.0, check_critical_rate},
      {"identity-suite", 1.0, check_identities},
      {"survival", 120.0, check_survival},
      {"fluid-limit", 120.0, check_fluid},
      {"profile-exponent", 600.0, check_profile},
      {"height-scaling", 1800.0, check_height},
      {"exact-identities", 30.0, check_exact_identities},
      {"coupling", 60.0, check_coupling},
      {"determinism", 60.0, check_determinism},
  };

  std::ofstream rep;
  if (!report.empty()) rep.open(report);
  int passed = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::none_of(only.begin(), only.end(),
                                      [&](const auto& s) { return c.name.find(s) != std::string::npos; }))
      continue;
    Verdict v;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.body(v);
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.check(secs < c.budget_s, "over budget");
    std::ostringstream line;
    line << (v.ok ? "[PASS] " : "[FAIL] ") << c.name << " (" << fmt(secs, 3) << " s of " << c.budget_s
         << " s): ";
    auto detail = v.detail.str();
    while (!detail.empty() && (detail.back() == ' ' || detail.back() == ';')) detail.pop_back();
    line << detail;
    for (std::size_t i = 0; i < v.failed.size(); ++i) line << (i ? ", " : " | failed: ") << v.failed[i];
    std::cout << line.str() << std::endl;
    if (rep) rep << line.str() << '\n';
    ++ran;
    passed += v.ok;
  }
  std::ostringstream tail;
  tail << passed << "/" << ran << " criteria passed";
  std::cout << tail.str() << std::endl;
  if (rep) rep << tail.str() << '\n';
  return 0;
}
