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

#include "ctxmpc/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "ctxmpc/error.hpp"

namespace ctxmpc {

using nlohmann::json;

std::string_view scenario_kind_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Drone: return "drone";
    case ScenarioKind::Battery: return "battery-synthetic";
    case ScenarioKind::Custom: return "custom";
  }
  return "?";
}

std::string_view encoder_source_name(EncoderSource source) {
  switch (source) {
    case EncoderSource::Scripted: return "scripted";
    case EncoderSource::Categorical: return "categorical";
    case EncoderSource::Llm: return "llm";
    case EncoderSource::LlmFixture: return "llm-fixture";
  }
  return "?";
}

std::string_view predictor_variant_name(PredictorVariant variant) {
  switch (variant) {
    case PredictorVariant::LlmEmbedding: return "llm-embedding";
    case PredictorVariant::Metadata: return "metadata";
    case PredictorVariant::BiasOnly: return "bias-only";
    case PredictorVariant::FixedAverage: return "fixed-average";
    case PredictorVariant::FixedZero: return "fixed-zero";
  }
  return "?";
}

PredictorVariant parse_predictor_variant(std::string_view name) {
  for (auto v : {PredictorVariant::LlmEmbedding, PredictorVariant::Metadata,
                 PredictorVariant::BiasOnly, PredictorVariant::FixedAverage,
                 PredictorVariant::FixedZero}) {
    if (predictor_variant_name(v) == name) return v;
  }
  throw ConfigError("unknown predictor variant '" + std::string(name) + "'");
}

namespace {

ScenarioKind parse_kind(const std::string& s) {
  for (auto k : {ScenarioKind::Drone, ScenarioKind::Battery, ScenarioKind::Custom}) {
    if (scenario_kind_name(k) == s) return k;
  }
  throw ConfigError("unknown scenario '" + s + "' (drone | battery-synthetic | custom)");
}

EncoderSource parse_encoder(const std::string& s) {
  for (auto e : {EncoderSource::Scripted, EncoderSource::Categorical, EncoderSource::Llm,
                 EncoderSource::LlmFixture}) {
    if (encoder_source_name(e) == s) return e;
  }
  throw ConfigError("unknown encoder source '" + s + "'");
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <class T>
void read(const json& j, const char* key, std::optional<T>& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::vector<std::array<double, 2>> default_path() {
  return {{0.0, 0.0}, {5000.0, 0.0}, {5000.0, 3160.0}, {0.0, 3160.0}};
}

}  // namespace

Matrix matrix_from_json(const json& rows) {
  if (!rows.is_array() || rows.empty()) throw ConfigError("matrix: expected nested rows");
  const auto r = static_cast<Index>(rows.size());
  const auto c = static_cast<Index>(rows.at(0).size());
  Matrix M(r, c);
  for (Index i = 0; i < r; ++i) {
    const auto& row = rows.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Index>(row.size()) != c) {
      throw ConfigError("matrix: ragged rows");
    }
    for (Index j = 0; j < c; ++j) M(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
  }
  return M;
}

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

json ScenarioConfig::to_json() const {
  json j;
  j["schema_version"] = schema_version;
  j["scenario"] = std::string(scenario_kind_name(kind));
  j["T"] = T;
  j["k"] = opt(k);
  j["loss"] = std::string(loss_kind_name(loss));
  j["normalizer"] = normalizer == WindowNormalizer::Verbatim ? "verbatim" : "term-count";
  j["theta"] = {{"center", opt(theta.center)}, {"radius", opt(theta.radius)},
                {"init", opt(theta.init)}};
  j["eta"] = {{"D", opt(eta.D)},
              {"G", opt(eta.G)},
              {"rates", eta.rates},
              {"safety", eta.safety},
              {"calibration_samples", eta.calibration_samples},
              {"calibration_seed", eta.calibration_seed}};
  j["encoder"] = std::string(encoder_source_name(encoder));
  j["clip"] = clip;
  j["seeds"] = seeds;
  j["output"] = output;
  switch (kind) {
    case ScenarioKind::Drone:
      j["drone"] = {{"path", drone.path},
                    {"speed", drone.speed},
                    {"period", drone.period},
                    {"wind_half_range", drone.wind_half_range},
                    {"wind_gain", drone.wind_gain},
                    {"x0", opt(drone.x0)}};
      break;
    case ScenarioKind::Battery:
      j["battery"] = {{"variant", std::string(predictor_variant_name(battery.variant))},
                      {"state_weight", battery.state_weight},
                      {"input_weight", battery.input_weight},
                      {"catalog", battery.catalog},
                      {"fixtures", battery.fixtures},
                      {"miss", battery.miss == MissPolicy::Error ? "error" : "zero"},
                      {"bias", battery.bias},
                      {"effects", battery.effects},
                      {"noise_half_width", battery.noise_half_width},
                      {"gap", battery.gap}};
      break;
    case ScenarioKind::Custom:
      j["custom"] = {{"A", matrix_to_json(custom.A)},
                     {"B", matrix_to_json(custom.B)},
                     {"Q", matrix_to_json(custom.Q)},
                     {"R", matrix_to_json(custom.R)},
                     {"W", opt(custom.W)},
                     {"w_mean", custom.w_mean},
                     {"w_half_width", custom.w_half_width},
                     {"context", custom.context},
                     {"context_dim", custom.context_dim},
                     {"context_half_width", custom.context_half_width},
                     {"decoder", custom.decoder},
                     {"x0", opt(custom.x0)}};
      break;
  }
  return j;
}

ScenarioConfig ScenarioConfig::from_json(const json& j) {
  only_keys(j, "config", {"schema_version", "scenario", "T", "k", "loss", "normalizer", "theta",
                          "eta", "encoder", "clip", "seeds", "output", "drone", "battery",
                          "custom"});
  ScenarioConfig c;
  try {
    read(j, "schema_version", c.schema_version);
    if (c.schema_version != 1) {
      throw ConfigError("unsupported schema_version " + std::to_string(c.schema_version));
    }
    c.kind = parse_kind(j.at("scenario").get<std::string>());
    if (c.kind == ScenarioKind::Battery) {
      c.T = 2160;
      c.encoder = EncoderSource::LlmFixture;
    }
    read(j, "T", c.T);
    read(j, "k", c.k);
    if (j.contains("loss")) c.loss = parse_loss_kind(j.at("loss").get<std::string>());
    if (j.contains("normalizer")) {
      const auto s = j.at("normalizer").get<std::string>();
      if (s == "verbatim") c.normalizer = WindowNormalizer::Verbatim;
      else if (s == "term-count") c.normalizer = WindowNormalizer::TermCount;
      else throw ConfigError("normalizer must be verbatim | term-count");
    }
    if (j.contains("theta")) {
      const auto& t = j.at("theta");
      only_keys(t, "theta", {"center", "radius", "init"});
      read(t, "center", c.theta.center);
      read(t, "radius", c.theta.radius);
      read(t, "init", c.theta.init);
    }
    if (j.contains("eta")) {
      const auto& e = j.at("eta");
      only_keys(e, "eta", {"D", "G", "rates", "safety", "calibration_samples", "calibration_seed"});
      read(e, "D", c.eta.D);
      read(e, "G", c.eta.G);
      read(e, "rates", c.eta.rates);
      read(e, "safety", c.eta.safety);
      read(e, "calibration_samples", c.eta.calibration_samples);
      read(e, "calibration_seed", c.eta.calibration_seed);
    }
    if (j.contains("encoder")) c.encoder = parse_encoder(j.at("encoder").get<std::string>());
    read(j, "clip", c.clip);
    read(j, "seeds", c.seeds);
    read(j, "output", c.output);

    c.drone.path = default_path();
    if (j.contains("drone")) {
      const auto& d = j.at("drone");
      only_keys(d, "drone", {"path", "speed", "period", "wind_half_range", "wind_gain", "x0"});
      read(d, "path", c.drone.path);
      read(d, "speed", c.drone.speed);
      read(d, "period", c.drone.period);
      read(d, "wind_half_range", c.drone.wind_half_range);
      read(d, "wind_gain", c.drone.wind_gain);
      read(d, "x0", c.drone.x0);
    }
    if (j.contains("battery")) {
      const auto& b = j.at("battery");
      only_keys(b, "battery", {"variant", "state_weight", "input_weight", "catalog", "fixtures",
                               "miss", "bias", "effects", "noise_half_width", "gap"});
      if (b.contains("variant")) {
        c.battery.variant = parse_predictor_variant(b.at("variant").get<std::string>());
      }
      read(b, "state_weight", c.battery.state_weight);
      read(b, "input_weight", c.battery.input_weight);
      read(b, "catalog", c.battery.catalog);
      read(b, "fixtures", c.battery.fixtures);
      if (b.contains("miss")) {
        const auto s = b.at("miss").get<std::string>();
        if (s == "error") c.battery.miss = MissPolicy::Error;
        else if (s == "zero") c.battery.miss = MissPolicy::ZeroFallback;
        else throw ConfigError("battery.miss must be error | zero");
      }
      read(b, "bias", c.battery.bias);
      read(b, "effects", c.battery.effects);
      read(b, "noise_half_width", c.battery.noise_half_width);
      read(b, "gap", c.battery.gap);
    }
    if (c.kind == ScenarioKind::Custom) {
      const auto& u = j.at("custom");
      only_keys(u, "custom", {"A", "B", "Q", "R", "W", "w_mean", "w_half_width", "context",
                              "context_dim", "context_half_width", "decoder", "x0"});
      c.custom.A = matrix_from_json(u.at("A"));
      c.custom.B = matrix_from_json(u.at("B"));
      c.custom.Q = matrix_from_json(u.at("Q"));
      c.custom.R = matrix_from_json(u.at("R"));
      read(u, "W", c.custom.W);
      c.custom.w_mean = u.at("w_mean").get<std::vector<double>>();
      c.custom.w_half_width = u.at("w_half_width").get<std::vector<double>>();
      read(u, "context", c.custom.context);
      read(u, "context_dim", c.custom.context_dim);
      read(u, "context_half_width", c.custom.context_half_width);
      read(u, "decoder", c.custom.decoder);
      read(u, "x0", c.custom.x0);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (c.T < 0) throw ConfigError("T must be >= 0");
  if (c.k && *c.k < 1) throw ConfigError("k must be >= 1");
  if (c.seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (c.theta.radius && !(*c.theta.radius > 0.0)) throw ConfigError("theta.radius must be > 0");
  if (!(c.eta.safety > 0.0)) throw ConfigError("eta.safety must be > 0");
  if (c.drone.path.size() < 2) throw ConfigError("drone.path needs >= 2 waypoints");
  if (c.kind == ScenarioKind::Custom) {
    const auto n = static_cast<std::size_t>(c.custom.A.rows());
    if (c.custom.w_mean.size() != n || c.custom.w_half_width.size() != n) {
      throw ConfigError("custom: w_mean and w_half_width need one entry per state");
    }
    if (c.custom.context != "none" && c.custom.context != "uniform" &&
        c.custom.context != "disturbance") {
      throw ConfigError("custom.context must be none | uniform | disturbance");
    }
    if (c.custom.decoder != "full" && c.custom.decoder != "bias_only") {
      throw ConfigError("custom.decoder must be full | bias_only");
    }
  }
  if (c.kind == ScenarioKind::Battery && c.battery.effects.size() != 3) {
    throw ConfigError("battery.effects needs one entry per channel (3)");
  }
  return c;
}

std::string ScenarioConfig::digest() const {
  json j = to_json();
  j.erase("output");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path ScenarioConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute() || data_dir.empty()) return p;
  return data_dir / p;
}

ScenarioConfig load_config(const std::filesystem::path& path, const std::filesystem::path& data_dir) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  ScenarioConfig c = ScenarioConfig::from_json(j);
  c.data_dir = data_dir.empty() ? path.parent_path() : data_dir;
  return c;
}

ScenarioConfig default_drone_config() {
  ScenarioConfig c = ScenarioConfig::from_json({{"scenario", "drone"}});
  return c;
}

ScenarioConfig default_battery_config(PredictorVariant variant) {
  return ScenarioConfig::from_json(
      {{"scenario", "battery-synthetic"},
       {"battery", {{"variant", std::string(predictor_variant_name(variant))}}}});
}

}  // namespace ctxmpc
