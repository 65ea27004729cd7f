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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxmpc/llm_client.hpp"
#include "ctxmpc/losses.hpp"
#include "ctxmpc/types.hpp"

namespace ctxmpc {

enum class ScenarioKind { Drone, Battery, Custom };
enum class EncoderSource { Scripted, Categorical, Llm, LlmFixture };
enum class PredictorVariant { LlmEmbedding, Metadata, BiasOnly, FixedAverage, FixedZero };

std::string_view scenario_kind_name(ScenarioKind kind);
std::string_view encoder_source_name(EncoderSource source);
std::string_view predictor_variant_name(PredictorVariant variant);
PredictorVariant parse_predictor_variant(std::string_view name);

struct ThetaConfig {
  std::optional<std::vector<double>> center;  // default: zero
  std::optional<double> radius;               // default: per scenario
  std::optional<std::vector<double>> init;    // default: center
};

struct EtaConfig {
  std::optional<double> D;     // default: Theta diameter
  std::optional<double> G;     // default: calibrated gradient bound
  std::vector<double> rates;   // explicit schedule; overrides D and G when set
  double safety = 1.5;
  Index calibration_samples = 2000;
  std::uint64_t calibration_seed = 0x43414c4942ULL;
};

struct DroneConfig {
  // Closed polyline, traversed repeatedly. Default: 5000 x 3160 rectangle,
  // perimeter 16320.
  std::vector<std::array<double, 2>> path;
  double speed = 20.0;
  double period = 0.2;
  double wind_half_range = 20.0;
  double wind_gain = 0.2;
  std::optional<std::vector<double>> x0;  // default: zero
};

struct BatteryConfig {
  PredictorVariant variant = PredictorVariant::LlmEmbedding;
  double state_weight = 1e-2;
  double input_weight = 1e-4;
  std::string catalog = "battery/job_catalog.json";
  std::string fixtures = "battery/llm_fixtures.jsonl";
  MissPolicy miss = MissPolicy::Error;
  double bias = -245.0;
  std::vector<double> effects = {-40.0, -45.0, -95.0};
  double noise_half_width = 20.0;
  std::array<Index, 2> gap = {20, 150};  // idle steps between jobs on a channel
};

// Scalar-or-matrix system with i.i.d. uniform disturbances and a synthetic
// context channel: "none" (empty contexts), "uniform" (d ~ U(-h, h)^p
// independent of w) or "disturbance" (d = w).
struct CustomConfig {
  Matrix A, B, Q, R;
  std::optional<double> W;  // default: supremum of the disturbance box
  std::vector<double> w_mean;
  std::vector<double> w_half_width;
  std::string context = "none";
  Index context_dim = 1;
  double context_half_width = 1.0;
  std::string decoder = "full";  // full | bias_only
  std::optional<std::vector<double>> x0;
};

struct ScenarioConfig {
  int schema_version = 1;
  ScenarioKind kind = ScenarioKind::Drone;
  Index T = 4000;
  std::optional<Index> k;  // default: ceil(log T / log(1 / rho(F)))
  LossKind loss = LossKind::Special;
  WindowNormalizer normalizer = WindowNormalizer::Verbatim;
  ThetaConfig theta;
  EtaConfig eta;
  EncoderSource encoder = EncoderSource::Scripted;
  bool clip = true;
  std::vector<std::uint64_t> seeds = {0};
  std::string output = "out";
  DroneConfig drone;
  BatteryConfig battery;
  CustomConfig custom;
  // Relative data paths resolve against this directory. Not serialized.
  std::filesystem::path data_dir;

  nlohmann::json to_json() const;
  static ScenarioConfig from_json(const nlohmann::json& j);
  // FNV-1a 64 of the canonical JSON without "output", as 16 hex digits.
  std::string digest() const;
  std::filesystem::path resolve(const std::string& path) const;
};

// Reads and validates a config file; data_dir defaults to `data_dir`, or to
// the file's directory when that is empty.
ScenarioConfig load_config(const std::filesystem::path& path,
                           const std::filesystem::path& data_dir = {});

ScenarioConfig default_drone_config();
ScenarioConfig default_battery_config(PredictorVariant variant = PredictorVariant::LlmEmbedding);

Matrix matrix_from_json(const nlohmann::json& rows);
nlohmann::json matrix_to_json(const Matrix& M);

}  // namespace ctxmpc
