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

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ctxmpc/closed_loop.hpp"
#include "ctxmpc/config.hpp"

namespace ctxmpc {

// Disturbances and contexts of one seed.
struct Realization {
  std::vector<Vector> w;
  std::vector<StepContext> contexts;
};

// A fully wired scenario: model, predictor, hypothesis set and, for tuned
// predictors, the tuning rule with its calibrated gradient bound.
struct Scenario {
  ScenarioConfig config;
  std::shared_ptr<const SystemModel> model;
  std::shared_ptr<const Encoder> encoder;
  AffineDecoder decoder = AffineDecoder::bias_only(1, 0);
  HypothesisSet set{Vector(), 1.0};
  Vector theta0;
  Vector x0;
  Index k = 1;
  bool tuned = true;
  // fixed-average: b is set per seed to the mean of that seed's w.
  bool hindsight_mean_bias = false;
  std::optional<TuningSetup> tuning;
  GradientBound gradient_bound;
  std::function<Realization(std::uint64_t seed)> realize;

  LoopInputs inputs(std::uint64_t seed) const;
};

// ceil(log T / log(1 / rho)), at least 1.
Index default_horizon(double rho, Index T);

// Piecewise-linear closed path sampled every `step` units of arc length,
// starting at the first waypoint; `count` samples.
std::vector<std::array<double, 2>> sample_closed_path(
    const std::vector<std::array<double, 2>>& waypoints, double step, Index count);
double closed_path_length(const std::vector<std::array<double, 2>>& waypoints);

SystemModel drone_model(double W);

Scenario build_drone_scenario(const ScenarioConfig& config);
Scenario build_battery_scenario(const ScenarioConfig& config);
Scenario build_custom_scenario(const ScenarioConfig& config);
Scenario build_scenario(const ScenarioConfig& config);

// Battery job catalog: Table-I-style shell commands with their per-channel
// effort levels (the planted ground truth of the synthetic generator) and
// structured metadata.
struct CatalogJob {
  std::string id;
  std::string channel;
  std::string description;
  std::map<std::string, int> levels;
  std::map<std::string, double> metadata;
  std::array<Index, 2> duration{1, 1};
};

struct JobCatalog {
  std::vector<std::string> channels;
  std::vector<CatalogJob> jobs;
  static JobCatalog load(const std::filesystem::path& path);
};

// Synthetic battery load: per channel, jobs from the catalog separated by idle
// gaps; w_t = bias + sum_i effects_i L_i(t) + U(-h, h), where L_i(t) is the
// largest level on channel i among the jobs active at t.
Realization battery_realization(const JobCatalog& catalog, const BatteryConfig& config, Index T,
                                std::uint64_t seed);

// Feature keys of the metadata regression, and max-abs scaling over the
// catalog so every feature lies in [-1, 1].
std::vector<std::string> battery_metadata_keys();
std::vector<double> battery_metadata_scales(const JobCatalog& catalog);

}  // namespace ctxmpc
