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


// sirtree command-line tool.
//
// Exit codes: 0 ok, 1 a verification failed, 2 bad arguments or
// configuration, 3 capacity exceeded, 4 I/O failure.

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sirtree.hpp"
#include "sirtree/harness/experiments.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using sirtree::harness::ExperimentConfig;
using sirtree::harness::ExperimentKind;

enum Exit : int { kOk = 0, kVerifyFailed = 1, kBadConfig = 2, kCapacity = 3, kIo = 4 };

json constants_json(double lambda) {
  const auto c = sirtree::TheoryConstants::at(lambda);
  const auto sup = sirtree::kappa_sup(lambda);
  json j;
  j["lambda"] = lambda;
  j["gamma"] = c.gamma;
  j["z_lambda"] = c.z_lambda;
  j["m_lambda"] = c.m_lambda;
  j["neg_log_m"] = -std::log(c.m_lambda);
  j["t_lambda"] = c.t_lambda;
  j["kappa"] = c.kappa;
  j["kappa_left"] = sirtree::kappa_left(lambda);
  j["kappa_right"] = sirtree::kappa_right(lambda);
  j["kappa_sup"] = sup.value;
  j["kappa_sup_argmax"] = sup.argmax;
  j["regime"] = std::string(sirtree::to_string(c.regime));
  j["ill_conditioned"] = c.ill_conditioned;
  return j;
}

// "0.3" or "0.3:0.5" (real:imaginary).
std::complex<double> parse_complex(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) return {std::stod(s), 0.0};
    return {std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw sirtree::ConfigError("cannot parse complex value '" + s + "'");
  }
}

void write_json(const json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream os(out);
  os << j.dump(2) << '\n';
  if (!os) throw sirtree::harness::IoError("cannot write '" + out + "'");
}

struct SimOptions {
  ExperimentConfig config;
  std::string out;
  std::string format = "csv";
  std::vector<std::string> z;
  std::string band_y;
  std::string preset = "polya";
};

void add_common(CLI::App* app, SimOptions& o) {
  auto& c = o.config;
  app->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  app->add_option("--replicas", c.replicas, "Number of replicas (cap when --survivors is set)")->capture_default_str();
  app->add_option("--threads", c.threads, "Worker threads; results do not depend on it")->capture_default_str();
  app->add_option("--out", o.out, "Output directory for records, config.json and summary.json");
  app->add_option("--format", o.format, "Record format")->check(CLI::IsMember({"csv", "ndjson"}))->capture_default_str();
}

void add_rate(CLI::App* app, SimOptions& o) {
  auto& c = o.config;
  app->add_option("--lambda", c.lambda, "Rate multiplier (lambda > 1)")->capture_default_str();
  app->add_option("--n", c.n, "Population size")->capture_default_str();
  app->add_flag("--force", c.force, "Allow lambda in (1, 1.05]");
}

int run_sim(SimOptions& o) {
  auto& c = o.config;
  if (!o.z.empty()) {
    c.z_list.clear();
    for (const auto& s : o.z) c.z_list.push_back(parse_complex(s));
  }
  if (!o.band_y.empty()) {
    c.band_y = o.band_y == "inf" ? std::numeric_limits<double>::infinity() : std::stod(o.band_y);
  }
  if (o.preset == "polya") c.preset = sirtree::harness::UrnPreset::kPolya;
  if (o.preset == "alternating") c.preset = sirtree::harness::UrnPreset::kAlternating;
  if (o.preset == "from-tree") c.preset = sirtree::harness::UrnPreset::kFromTree;
  const auto format = sirtree::harness::parse_format(o.format);
  const auto result = sirtree::harness::run_experiment(c);
  if (!o.out.empty()) sirtree::harness::persist(result.records, c, result.summary, o.out, format);
  std::cout << result.summary.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Infection trees of the SIR epidemic on the complete graph"};
  app.set_version_flag("--version", std::string(sirtree::kVersion));
  app.require_subcommand(1);

  // constants
  double c_lambda = 2.0;
  std::string c_out;
  std::vector<double> sweep;
  auto* constants = app.add_subcommand("constants", "Limit constants as JSON");
  constants->add_option("--lambda", c_lambda, "Rate multiplier")->capture_default_str();
  constants->add_option("--sweep", sweep, "lo,hi,count: add a lambda sweep table")->expected(3)->delimiter(',');
  constants->add_option("--out", c_out, "Write JSON here instead of stdout");

  auto* lc = app.add_subcommand("lambda-c", "Print the critical rate lambda_c");

  std::size_t v_count = 100'000;
  auto* verify = app.add_subcommand("verify-lambert", "Check the Lambert W solver and its bounds");
  verify->add_option("--count", v_count, "Points per suite")->capture_default_str();

  struct SimDef {
    const char* name;
    const char* help;
    ExperimentKind kind;
  };
  const SimDef defs[] = {
      {"sim-height", "Tree height over log n", ExperimentKind::kHeight},
      {"sim-profile", "Active profile band exponents", ExperimentKind::kProfile},
      {"sim-fluid", "Walk against its fluid limit", ExperimentKind::kFluid},
      {"sim-dangling", "Snapshot and dangling-tree heights", ExperimentKind::kDangling},
      {"sim-survival", "Survival frequency of the epidemic", ExperimentKind::kSurvival},
      {"martingale-check", "Laplace-transform martingale on a fixed trace", ExperimentKind::kMartingaleCheck},
      {"coupling-demo", "Three-forest sandwich coupling", ExperimentKind::kCouplingDemo},
      {"urn", "Two-colour urn runs", ExperimentKind::kUrn},
  };
  std::vector<SimOptions> sims(std::size(defs));
  std::vector<CLI::App*> sim_apps;
  for (std::size_t i = 0; i < std::size(defs); ++i) {
    auto& o = sims[i];
    o.config.kind = defs[i].kind;
    auto* sub = app.add_subcommand(defs[i].name, defs[i].help);
    add_common(sub, o);
    auto& c = o.config;
    switch (defs[i].kind) {
      case ExperimentKind::kHeight:
      case ExperimentKind::kSurvival:
        add_rate(sub, o);
        sub->add_option("--survivors", c.survivors, "Target survivor count")->capture_default_str();
        sub->add_option("--survival-fraction", c.survival_fraction, "Survival means tau >= floor(f t_lambda n)")
            ->capture_default_str();
        break;
      case ExperimentKind::kProfile:
        add_rate(sub, o);
        sub->add_option("--survivors", c.survivors, "Target survivor count")->capture_default_str();
        sub->add_option("--t", c.t, "Snapshot at floor(n t)")->capture_default_str();
        sub->add_option("--x", c.x_grid, "Band lower edges x")->delimiter(',');
        sub->add_option("--y", o.band_y, "Band upper edge y, or inf");
        break;
      case ExperimentKind::kFluid:
        c.t = 1.2;
        add_rate(sub, o);
        sub->add_option("--survivors", c.survivors, "Target survivor count")->capture_default_str();
        sub->add_option("--t", c.t, "Comparison window [0, t]")->capture_default_str();
        break;
      case ExperimentKind::kDangling:
        add_rate(sub, o);
        sub->add_option("--survivors", c.survivors, "Target survivor count")->capture_default_str();
        sub->add_option("--delta", c.delta, "Snapshot at floor((1-delta) t_lambda n)")->capture_default_str();
        sub->add_option("--x", c.x_grid, "Band lower edges x")->delimiter(',');
        sub->add_option("--y", o.band_y, "Band upper edge y, or inf");
        break;
      case ExperimentKind::kMartingaleCheck:
        c.replicas = 1000;
        add_rate(sub, o);
        sub->add_option("--t", c.t, "Horizon floor(n t)")->capture_default_str();
        sub->add_option("--z", o.z, "Values of z, each re or re:im")->delimiter(',');
        break;
      case ExperimentKind::kCouplingDemo:
        c.replicas = 20'000;
        sub->add_option("--roots", c.roots, "Roots per forest")->capture_default_str();
        sub->add_option("--p", c.p, "Upper freeze probability")->capture_default_str();
        sub->add_option("--q", c.q, "Lower freeze probability")->capture_default_str();
        sub->add_option("--r", c.r, "Middle freeze probability")->capture_default_str();
        break;
      case ExperimentKind::kUrn:
        c.replicas = 2000;
        add_rate(sub, o);
        sub->add_option("--preset", o.preset, "Replacement sequence")
            ->check(CLI::IsMember({"polya", "alternating", "from-tree"}))
            ->capture_default_str();
        sub->add_option("--k", c.k, "Draws per run")->capture_default_str();
        break;
    }
    sim_apps.push_back(sub);
  }

  // export-tree
  ExperimentConfig e;
  std::uint64_t e_replica = 0;
  double e_t = -1.0;
  std::string e_out;
  auto* exp = app.add_subcommand("export-tree", "Run one epidemic and write its vertices as CSV");
  exp->add_option("--lambda", e.lambda, "Rate multiplier")->capture_default_str();
  exp->add_option("--n", e.n, "Population size")->capture_default_str();
  exp->add_option("--seed", e.seed, "Master seed")->capture_default_str();
  exp->add_option("--replica", e_replica, "Replica id")->capture_default_str();
  exp->add_option("--t", e_t, "Stop at floor(n t); default runs to absorption");
  exp->add_option("--out", e_out, "CSV path")->required();
  exp->add_flag("--force", e.force, "Allow lambda in (1, 1.05]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kBadConfig;
  }

  try {
    if (constants->parsed()) {
      json j = constants_json(c_lambda);
      j["lambda_c"] = sirtree::lambda_c();
      if (!sweep.empty()) {
        const auto count = static_cast<int>(sweep[2]);
        if (count < 2 || !(sweep[0] > 1.0 && sweep[1] > sweep[0])) throw sirtree::ConfigError("--sweep needs 1 < lo < hi and count >= 2");
        json rows = json::array();
        for (int i = 0; i < count; ++i) rows.push_back(constants_json(sweep[0] + (sweep[1] - sweep[0]) * i / (count - 1)));
        j["sweep"] = rows;
      }
      write_json(j, c_out);
      return kOk;
    }
    if (lc->parsed()) {
      std::cout.precision(17);
      std::cout << sirtree::lambda_c() << '\n';
      return kOk;
    }
    if (verify->parsed()) {
      const auto r = sirtree::verify_residual(v_count);
      const auto b = sirtree::verify_branch_bound(v_count);
      const auto l = sirtree::verify_lambda_bound(v_count);
      const auto s = sirtree::verify_series_bounds(v_count);
      const auto i2 = sirtree::verify_input2(v_count);
      auto bound = [](const sirtree::BoundCheck& c) {
        return json{{"points", c.points}, {"violations", c.violations}, {"min_margin", c.min_margin}};
      };
      json j;
      j["residual"] = {{"points", r.points}, {"violations", r.violations}, {"max_scaled_residual", r.max_scaled_residual}};
      j["branch_bound"] = bound(b);
      j["lambda_bound"] = bound(l);
      j["series_bounds"] = bound(s);
      j["input2"] = bound(i2);
      std::cout << j.dump(2) << '\n';
      const bool ok = r.violations + b.violations + l.violations + s.violations + i2.violations == 0;
      return ok ? kOk : kVerifyFailed;
    }
    if (exp->parsed()) {
      sirtree::harness::detail::config_check(e.lambda > 1.0 && (e.force || e.lambda > 1.05),
                                             "lambda must exceed 1.05 (or 1 with --force)");
      sirtree::harness::detail::config_check(e.n >= 1, "n must be >= 1");
      sirtree::harness::detail::SirTreeRun run(e, e_replica);
      const auto stop = e_t < 0.0 ? sirtree::default_horizon(e.n)
                                  : static_cast<std::int64_t>(std::floor(e_t * static_cast<double>(e.n)));
      run.run_until(stop);
      run.check_bookkeeping();
      if (const auto parent = fs::path(e_out).parent_path(); !parent.empty()) fs::create_directories(parent);
      std::ofstream os(e_out);
      sirtree::write_vertex_csv(run.tree(), os);
      if (!os) throw sirtree::harness::IoError("cannot write '" + e_out + "'");
      std::cout << json{{"nodes", run.tree().node_count()}, {"steps", run.steps()},
                        {"active", run.infectious()}, {"height", run.tree().height()}}
                       .dump()
                << '\n';
      return kOk;
    }
    for (std::size_t i = 0; i < sim_apps.size(); ++i) {
      if (sim_apps[i]->parsed()) return run_sim(sims[i]);
    }
  } catch (const sirtree::ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return kBadConfig;
  } catch (const sirtree::DomainError& err) {
    std::cerr << "domain error: " << err.what() << '\n';
    return kBadConfig;
  } catch (const sirtree::CapacityError& err) {
    std::cerr << "capacity exceeded: " << err.what() << '\n';
    return kCapacity;
  } catch (const sirtree::harness::IoError& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return kIo;
  }
  return kOk;
}
