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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxmpc/analysis.hpp"
#include "ctxmpc/scenarios.hpp"

namespace ctxmpc {

struct SeedRun {
  std::uint64_t seed = 0;
  RunTrace trace;
  double cost = 0.0;
  std::optional<CostGap> gap;
  std::optional<HindsightResult> hindsight;
  std::optional<RegretReport> regret;
};

struct RunOptions {
  unsigned threads = 0;  // 0: hardware concurrency
  bool analyze = true;   // cost gap, hindsight theta and regret per seed
};

struct ExperimentResult {
  std::string digest;
  Index k = 1;
  std::optional<double> D;
  std::optional<double> G;
  std::vector<SeedRun> runs;  // in config seed order

  double mean_cost() const;
  double mean_regret() const;  // requires analyze
  Vector mean_final_theta() const;
  nlohmann::json summary(const Scenario& scenario) const;
};

// Runs every configured seed through the closed loop on a bounded worker
// pool. Each worker owns its loop state; results are ordered by seed index.
ExperimentResult run_scenario(const Scenario& scenario, const RunOptions& options = {});
ExperimentResult run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

// Writes <root>/<digest>/{config.json, trace_seed<seed>.csv, summary.json}.
std::filesystem::path write_outputs(const Scenario& scenario, const ExperimentResult& result,
                                    const std::filesystem::path& root);

struct ReplayReport {
  std::string digest;
  std::size_t compared = 0;
  std::vector<std::string> mismatched;
  bool ok() const { return compared > 0 && mismatched.empty(); }
};

// Re-runs the stored config of <root>/<digest> and compares each regenerated
// trace CSV byte-for-byte with the stored file. `data_dir` overrides the data
// directory recorded in summary.json.
ReplayReport replay(const std::filesystem::path& root, const std::string& digest,
                    const std::optional<std::filesystem::path>& data_dir = std::nullopt);

std::string trace_csv_string(const RunTrace& trace);

// LD study across prediction horizons for one seed: for each k, the largest
// per-step loss discrepancy over `probes` evenly spaced steps whose windows end
// before T - 1, plus the value at the step whose window ends exactly at T - 1.
struct LdSweepPoint {
  Index k = 0;
  double ld = 0.0;
  double ld_at_end = 0.0;
};
struct LdSweep {
  std::vector<LdSweepPoint> points;
  LineFit fit;  // log LD against k
  double log_rho = 0.0;
};
LdSweep sweep_k(const Scenario& scenario, Index kmax, std::uint64_t seed, Index probes = 64);

}  // namespace ctxmpc
