// Copyright 2026 The ctxmpc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// ctxmpc: run scenarios, analyze stored runs and replay them.
//
// Exit codes: 0 ok, 1 configuration / usage error, 2 runtime error (including
// a replay mismatch).

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "ctxmpc/analysis.hpp"
#include "ctxmpc/config.hpp"
#include "ctxmpc/error.hpp"
#include "ctxmpc/experiment.hpp"
#include "ctxmpc/log.hpp"
#include "ctxmpc/trace.hpp"

namespace fs = std::filesystem;
using namespace ctxmpc;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct Common {
  std::string config;
  std::string data;
  int seeds = 0;
  unsigned threads = 0;
};

ScenarioConfig load(const Common& c) {
  ScenarioConfig cfg = load_config(c.config, c.data.empty() ? fs::path() : fs::path(c.data));
  if (c.seeds > 0) {
    cfg.seeds.resize(static_cast<std::size_t>(c.seeds));
    std::iota(cfg.seeds.begin(), cfg.seeds.end(), std::uint64_t{0});
  }
  return cfg;
}

std::ostream& open_or_stdout(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw ConfigError("cannot write " + path);
  return file;
}

int cmd_run(const Common& c, const std::string& output, bool analyze) {
  ScenarioConfig cfg = load(c);
  if (!output.empty()) cfg.output = output;
  const Scenario scenario = build_scenario(cfg);
  const ExperimentResult res = run_scenario(scenario, {c.threads, analyze});
  const fs::path dir = write_outputs(scenario, res, cfg.output);
  std::cout << "digest " << res.digest << "\n"
            << "runs " << res.runs.size() << "\n"
            << "mean_cost " << format_double(res.mean_cost()) << "\n";
  if (analyze && !res.runs.empty() && res.runs.front().regret) {
    std::cout << "mean_regret " << format_double(res.mean_regret()) << "\n";
  }
  std::cout << "output " << dir.string() << "\n";
  return kOk;
}

int cmd_regret(const std::string& run_dir, const std::string& data, const std::string& output) {
  const fs::path dir(run_dir);
  ScenarioConfig cfg = load_config(dir / "config.json");
  if (!data.empty()) {
    cfg.data_dir = data;
  } else {
    std::ifstream in(dir / "summary.json");
    if (!in) throw ConfigError("missing summary.json in " + dir.string());
    cfg.data_dir = nlohmann::json::parse(in).at("data_dir").get<std::string>();
  }
  const Scenario scenario = build_scenario(cfg);
  if (!scenario.tuned) throw ConfigError("regret needs a tuned predictor");
  nlohmann::json report = nlohmann::json::array();
  for (const auto seed : cfg.seeds) {
    const fs::path path = dir / ("trace_seed" + std::to_string(seed) + ".csv");
    std::ifstream in(path);
    if (!in) throw ConfigError("missing trace " + path.string());
    const RunTrace trace = read_trace_csv(in);
    const LoopInputs inputs = scenario.inputs(seed);
    const auto d = embed_all(*inputs.encoder, inputs.contexts);
    const HindsightResult star = hindsight_theta(inputs, d, scenario.set);
    const RegretReport rep = regret(trace, inputs, d, star.theta);
    nlohmann::json j = rep.to_json();
    j["seed"] = seed;
    j["theta_star_degenerate"] = star.degenerate;
    report.push_back(std::move(j));
  }
  std::ofstream file;
  open_or_stdout(output, file) << report.dump(2) << "\n";
  return kOk;
}

int cmd_sweep_k(const Common& c, Index kmax, std::uint64_t seed, const std::string& output) {
  const Scenario scenario = build_scenario(load(c));
  const LdSweep sweep = sweep_k(scenario, kmax, seed);
  std::ofstream file;
  std::ostream& out = open_or_stdout(output, file);
  out << "k,ld,ld_at_end\n";
  for (const auto& p : sweep.points) {
    out << p.k << ',' << format_double(p.ld) << ',' << format_double(p.ld_at_end) << '\n';
  }
  out << "# slope=" << format_double(sweep.fit.slope)
      << " log_rho=" << format_double(sweep.log_rho) << '\n';
  return kOk;
}

int cmd_robustness(const Common& c, const std::string& output) {
  const Scenario scenario = build_scenario(load(c));
  const ExperimentResult res = run_scenario(scenario, {c.threads, false});
  std::ofstream file;
  std::ostream& out = open_or_stdout(output, file);
  out << "seed,t,c_norm,bias_gap,mean_w\n";
  for (const auto& r : res.runs) {
    for (const auto& p : robustness_diagnostics(r.trace, scenario.decoder)) {
      out << r.seed << ',' << p.t << ',' << format_double(p.c_norm) << ','
          << format_double(p.bias_gap) << ',' << format_double(p.mean_w) << '\n';
    }
  }
  return kOk;
}

int cmd_replay(const std::string& digest, const std::string& root, const std::string& data) {
  const ReplayReport rep =
      replay(root, digest, data.empty() ? std::nullopt : std::optional<fs::path>(data));
  std::cout << "compared " << rep.compared << "\n";
  for (const auto& m : rep.mismatched) std::cout << "mismatch " << m << "\n";
  std::cout << (rep.ok() ? "identical" : "DIFFERENT") << "\n";
  return rep.ok() ? kOk : kRuntimeError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-driven disturbance prediction for MPC: simulate, tune, analyze."};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace | debug | info | warn | error | off");

  Common common;
  auto add_common = [&](CLI::App* sub, bool with_seeds) {
    sub->add_option("-c,--config", common.config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--data", common.data, "Data directory for relative paths (default: config directory)");
    if (with_seeds) sub->add_option("--seeds", common.seeds, "Use seeds 0..N-1 instead of the configured list");
    sub->add_option("--threads", common.threads, "Worker threads (0: all cores)");
  };

  std::string output;
  bool no_analysis = false;
  auto* run = app.add_subcommand("run", "Execute a config: one trace per seed plus summary.json");
  add_common(run, true);
  run->add_option("-o,--output", output, "Output root (default: config 'output')");
  run->add_flag("--no-analysis", no_analysis, "Skip cost-gap, hindsight and regret analysis");

  std::string run_dir;
  std::string regret_data;
  auto* reg = app.add_subcommand("regret", "Regret against the hindsight-optimal theta for a stored run");
  reg->add_option("run_dir", run_dir, "Directory <output>/<digest> written by 'run'")->required()->check(CLI::ExistingDirectory);
  reg->add_option("--data", regret_data, "Data directory override");
  reg->add_option("-o,--output", output, "Write JSON here instead of stdout");

  Index kmax = 12;
  std::uint64_t sweep_seed = 0;
  auto* sweep = app.add_subcommand("sweep-k", "Loss-discrepancy study across prediction horizons");
  add_common(sweep, false);
  sweep->add_option("--kmax", kmax, "Largest horizon")->check(CLI::PositiveNumber);
  sweep->add_option("--seed", sweep_seed, "Disturbance seed");
  sweep->add_option("-o,--output", output, "CSV path (default: stdout)");

  auto* robust = app.add_subcommand("robustness", "Parameter limits under uninformative context");
  add_common(robust, true);
  robust->add_option("-o,--output", output, "CSV path (default: stdout)");

  std::string digest;
  std::string root = "out";
  auto* rep = app.add_subcommand("replay", "Re-run a stored config and compare traces byte-for-byte");
  rep->add_option("digest", digest, "Config digest")->required();
  rep->add_option("--root", root, "Output root holding <digest>/");
  rep->add_option("--data", regret_data, "Data directory override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    logger()->set_level(spdlog::level::from_str(log_level));
    if (*run) return cmd_run(common, output, !no_analysis);
    if (*reg) return cmd_regret(run_dir, regret_data, output);
    if (*sweep) return cmd_sweep_k(common, kmax, sweep_seed, output);
    if (*robust) return cmd_robustness(common, output);
    if (*rep) return cmd_replay(digest, root, regret_data);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const FixtureMissError& e) {
    std::cerr << "fixture miss: " << e.what() << "\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kConfigError;
}
