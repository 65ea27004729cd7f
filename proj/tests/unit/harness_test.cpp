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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "ctxmpc/analysis.hpp"
#include "ctxmpc/config.hpp"
#include "ctxmpc/error.hpp"
#include "ctxmpc/experiment.hpp"
#include "ctxmpc/rng.hpp"
#include "ctxmpc/scenarios.hpp"
#include "ctxmpc/trace.hpp"
#include "fixtures.hpp"

namespace ctxmpc {
namespace {

namespace fs = std::filesystem;

const fs::path kData = CTXMPC_TEST_DATA_DIR;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ctxmpc_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ScenarioConfig battery(PredictorVariant v, Index T = 2160) {
  ScenarioConfig c = default_battery_config(v);
  c.data_dir = kData;
  c.T = T;
  return c;
}

TEST(CounterRng, DeterministicAndStreamSeparated) {
  CounterRng a(42, 1), b(42, 1), c(42, 2);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    seen.insert(x);
    seen.insert(c.next_u64());
  }
  EXPECT_EQ(seen.size(), 2000u);
  CounterRng u(7);
  double sum = 0.0;
  for (int i = 0; i < 100'000; ++i) {
    const double v = u.uniform();
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
    sum += v;
  }
  EXPECT_NEAR(sum / 100'000, 0.5, 5e-3);
  EXPECT_EQ(CounterRng::kAlgorithm, "splitmix64-ctr/1");
  // SplitMix64 reference output for state 0 advanced once by the golden gamma.
  EXPECT_EQ(splitmix64_mix(0x9e3779b97f4a7c15ULL), 0xe220a8397b1dcdafULL);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -245.0, 1e-300, 6.02214076e23, 0.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-245.0), "-245");
}

TEST(Config, RoundTripAndDigest) {
  ScenarioConfig c = default_drone_config();
  c.seeds = {0, 1, 2};
  c.loss = LossKind::Mse;
  c.theta.radius = 0.6;
  const ScenarioConfig back = ScenarioConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.digest(), c.digest());
  EXPECT_EQ(c.digest().size(), 16u);
  ScenarioConfig moved = c;
  moved.output = "elsewhere";
  EXPECT_EQ(moved.digest(), c.digest());
  moved.T = 4001;
  EXPECT_NE(moved.digest(), c.digest());
}

TEST(Config, ShippedConfigsLoad) {
  for (const auto* name : {"drone.json", "battery.json", "robustness.json", "ld_decay.json"}) {
    const ScenarioConfig c = load_config(kData / "configs" / name);
    EXPECT_EQ(ScenarioConfig::from_json(c.to_json()).digest(), c.digest()) << name;
  }
}

TEST(Config, RejectsInvalidDocuments) {
  const auto base = default_drone_config().to_json();
  auto bad = [&](auto mutate) {
    nlohmann::json j = base;
    mutate(j);
    EXPECT_THROW(ScenarioConfig::from_json(j), ConfigError) << j.dump();
  };
  bad([](auto& j) { j["unknown_key"] = 1; });
  bad([](auto& j) { j["schema_version"] = 2; });
  bad([](auto& j) { j["loss"] = "huber"; });
  bad([](auto& j) { j["T"] = -1; });
  bad([](auto& j) { j["k"] = 0; });
  bad([](auto& j) { j["seeds"] = nlohmann::json::array(); });
  bad([](auto& j) { j["theta"]["radius"] = -1.0; });
  bad([](auto& j) { j["normalizer"] = "sometimes"; });
  bad([](auto& j) { j["T"] = "many"; });
  EXPECT_THROW(load_config(kData / "configs" / "missing.json"), ConfigError);
}

TEST(Config, MatrixJson) {
  const Matrix M = (Matrix(2, 3) << 1, 2, 3, 4, 5, 6).finished();
  EXPECT_EQ(matrix_from_json(matrix_to_json(M)), M);
  EXPECT_THROW(matrix_from_json(nlohmann::json::parse("[[1, 2], [3]]")), ConfigError);
}

TEST(ClosedPath, SamplesAtConstantArcLength) {
  const std::vector<std::array<double, 2>> sq = {{0, 0}, {10, 0}, {10, 10}, {0, 10}};
  EXPECT_DOUBLE_EQ(closed_path_length(sq), 40.0);
  EXPECT_DOUBLE_EQ(closed_path_length(default_drone_config().drone.path), 16'320.0);
  const auto pts = sample_closed_path(sq, 4.0, 12);
  EXPECT_EQ(pts[0], (std::array<double, 2>{0, 0}));
  EXPECT_EQ(pts[3], (std::array<double, 2>{10, 2}));
  EXPECT_EQ(pts[10], (std::array<double, 2>{0, 0}));
}

TEST(DefaultHorizon, LogRatio) {
  EXPECT_EQ(default_horizon(0.5, 1024), 10);
  EXPECT_EQ(default_horizon(0.5, 1025), 11);
  EXPECT_EQ(default_horizon(1e-6, 10), 1);
}

TEST(Experiment, ZeroHorizonGivesEmptyTrace) {
  ScenarioConfig c = default_drone_config();
  c.T = 0;
  c.k = 1;
  c.eta.G = 1.0;
  const auto res = run_scenario(c, {1, false});
  ASSERT_EQ(res.runs.size(), 1u);
  EXPECT_EQ(res.runs[0].trace.horizon(), 0);
  EXPECT_EQ(res.runs[0].cost, 0.0);
}

TEST(Experiment, ThreadCountDoesNotChangeResults) {
  auto c = testing::scalar_custom_config(300, 3, "uniform", 0.5, 0.5);
  c.seeds = {0, 1, 2, 3, 4};
  const Scenario sc = build_scenario(c);
  const auto a = run_scenario(sc, {1, false});
  const auto b = run_scenario(sc, {4, false});
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    EXPECT_EQ(a.runs[i].seed, c.seeds[i]);
    EXPECT_EQ(trace_csv_string(a.runs[i].trace), trace_csv_string(b.runs[i].trace));
  }
}

TEST(Trace, CsvRoundTrip) {
  ScenarioConfig c = default_drone_config();
  c.T = 40;
  const auto res = run_scenario(c, {1, false});
  const std::string csv = trace_csv_string(res.runs[0].trace);
  std::istringstream in(csv);
  const RunTrace back = read_trace_csv(in);
  EXPECT_EQ(trace_csv_string(back), csv);
  EXPECT_EQ(back.config_digest, c.digest());
  EXPECT_EQ(csv.rfind("# ctxmpc-trace v1", 0), 0u);
}

TEST(Experiment, WriteAndReplayByteIdentical) {
  const fs::path root = scratch_dir("replay");
  ScenarioConfig c = default_drone_config();
  c.T = 300;
  c.seeds = {0, 1};
  const Scenario sc = build_scenario(c);
  const auto res = run_scenario(sc);
  const fs::path dir = write_outputs(sc, res, root);
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
  EXPECT_TRUE(fs::exists(dir / "trace_seed1.csv"));
  const auto rep = replay(root, res.digest);
  EXPECT_TRUE(rep.ok());
  EXPECT_EQ(rep.compared, 2u);

  std::ofstream(dir / "trace_seed1.csv", std::ios::app) << "tampered\n";
  const auto bad = replay(root, res.digest);
  EXPECT_FALSE(bad.ok());
  EXPECT_EQ(bad.mismatched, std::vector<std::string>{"trace_seed1.csv"});
  EXPECT_THROW(replay(root, "0000000000000000"), ConfigError);
  fs::remove_all(root);
}

TEST(DroneScenario, WindCoefficientsZeroTheTruncatedResidual) {
  ScenarioConfig c = default_drone_config();
  c.T = 400;
  const Scenario sc = build_scenario(c);
  auto in = sc.inputs(3);
  in.theta0 = Eigen::Vector2d(-0.2, -0.2);
  in.clip = false;
  const RunTrace tr = run_closed_loop(in, std::nullopt);
  const PsiSequence psi = psi_sequence(*sc.model, tr);
  double worst = 0.0;
  for (const auto& p : psi.psi_hat) worst = std::max(worst, p.norm());
  EXPECT_LT(worst, 1e-9);

  // Same cost as MPC fed the true disturbances over the same window.
  const MpcController ctrl(*sc.model, sc.k);
  Vector x = in.x0;
  double cost = 0.0;
  for (Index t = 0; t < in.horizon(); ++t) {
    PredictionWindow win;
    win.t = t;
    win.k = sc.k;
    for (Index tau = t; tau <= horizon_end(t, sc.k, in.horizon()); ++tau) win.predictions.push_back(in.w[tau]);
    const Vector u = ctrl.action(x, win);
    cost += x.dot(sc.model->Q() * x) + u.dot(sc.model->R() * u);
    x = sc.model->A() * x + sc.model->B() * u + in.w[t];
  }
  cost += x.dot(sc.model->P() * x);
  EXPECT_NEAR(tr.recorded_cost(), cost, 1e-9 * cost);
}

TEST(DroneScenario, UntunedPredictorCostsMoreThanHindsight) {
  ScenarioConfig c = default_drone_config();
  c.T = 800;
  const Scenario sc = build_scenario(c);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto in = sc.inputs(seed);
    const auto emb = embed_all(*in.encoder, in.contexts);
    const Vector star = hindsight_theta(in, emb, sc.set).theta;
    in.theta0 = Vector::Zero(2);
    const double zero = run_closed_loop(in, emb, std::nullopt).recorded_cost();
    in.theta0 = star;
    const double best = run_closed_loop(in, emb, std::nullopt).recorded_cost();
    EXPECT_GT(zero, best) << seed;
    EXPECT_NEAR(star(0), -0.2, 0.02);
    EXPECT_NEAR(star(1), -0.2, 0.02);
  }
}

TEST(BatteryScenario, GeneratorRespectsBoundAndIsDeterministic) {
  const JobCatalog catalog = JobCatalog::load(kData / "battery/job_catalog.json");
  const BatteryConfig bc;
  const auto a = battery_realization(catalog, bc, 2160, 9);
  const auto b = battery_realization(catalog, bc, 2160, 9);
  double W = std::abs(bc.bias) + bc.noise_half_width;
  for (double e : bc.effects) W += 3.0 * std::abs(e);
  for (std::size_t t = 0; t < a.w.size(); ++t) {
    EXPECT_EQ(a.w[t], b.w[t]);
    EXPECT_LE(std::abs(a.w[t](0)), W);
  }
  const auto scales = battery_metadata_scales(catalog);
  EXPECT_EQ(scales.size(), battery_metadata_keys().size());
  for (double s : scales) EXPECT_GT(s, 0.0);
}

TEST(BatteryScenario, PlantedCoefficientsRecovered) {
  const Scenario sc = build_scenario(battery(PredictorVariant::LlmEmbedding));
  const auto in = sc.inputs(0);
  const auto res = hindsight_theta(in, embed_all(*in.encoder, in.contexts), sc.set);
  const Vector planted = (Vector(4) << -40, -45, -95, -245).finished();
  for (Index i = 0; i < 4; ++i) {
    EXPECT_NEAR(res.theta(i), planted(i), 0.05 * std::abs(planted(i))) << i;
  }
  EXPECT_FALSE(res.on_boundary);
}

TEST(BatteryScenario, ZeroEmbeddingsCollapseToBiasOnly) {
  const Scenario llm = build_scenario(battery(PredictorVariant::LlmEmbedding, 600));
  LoopInputs in = llm.inputs(1);
  const std::vector<Vector> zeros(in.w.size(), Vector::Zero(3));
  const auto schedule = LearningRateSchedule::explicit_rates({40.0, 20.0, 10.0});
  TuningSetup full{LossSpec::special(*llm.model, llm.k), llm.set, schedule};
  const RunTrace a = run_closed_loop(in, zeros, full);

  in.decoder = AffineDecoder::bias_only(1, 3);
  in.theta0 = Vector::Zero(1);
  TuningSetup bias{LossSpec::special(*llm.model, llm.k),
                   HypothesisSet(Vector::Zero(1), llm.set.radius()), schedule};
  const RunTrace b = run_closed_loop(in, zeros, bias);
  for (Index t = 0; t < a.horizon(); ++t) {
    EXPECT_TRUE(a.steps[t].theta.head(3).isZero(0.0));
    EXPECT_DOUBLE_EQ(a.steps[t].theta(3), b.steps[t].theta(0));
  }
  EXPECT_DOUBLE_EQ(a.recorded_cost(), b.recorded_cost());
}

TEST(BatteryScenario, VariantsShareDisturbances) {
  const Scenario a = build_scenario(battery(PredictorVariant::Metadata, 300));
  const Scenario b = build_scenario(battery(PredictorVariant::FixedAverage, 300));
  EXPECT_EQ(a.realize(4).w, b.realize(4).w);
  EXPECT_FALSE(b.tuned);
  EXPECT_EQ(b.decoder.dim(), 0);
  double mean = 0.0;
  for (const auto& w : b.realize(4).w) mean += w(0) / 300.0;
  EXPECT_NEAR(b.inputs(4).decoder.offset(Vector::Zero(b.decoder.p()))(0), mean, 1e-9);
}

TEST(BatteryScenario, MissingFixtureIsRuntimeFailure) {
  ScenarioConfig c = battery(PredictorVariant::LlmEmbedding, 100);
  const fs::path dir = scratch_dir("empty_fixtures");
  std::ofstream(dir / "none.jsonl").flush();
  c.battery.fixtures = (dir / "none.jsonl").string();
  EXPECT_THROW(run_scenario(c, {1, false}), FixtureMissError);
  c.battery.miss = MissPolicy::ZeroFallback;
  EXPECT_NO_THROW(run_scenario(c, {1, false}));
  fs::remove_all(dir);
}

#ifdef CTXMPC_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string(CTXMPC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  if (std::string(CTXMPC_CLI_PATH).empty()) GTEST_SKIP() << "CLI not built";
  const fs::path dir = scratch_dir("cli");
  std::ofstream(dir / "broken.json") << "{\"T\": ";
  std::ofstream(dir / "small.json") << R"({"schema_version": 1, "scenario": "drone", "T": 120, "seeds": [0]})";
  EXPECT_EQ(run_cli("--bogus-flag"), 1);
  EXPECT_EQ(run_cli("run -c " + (dir / "broken.json").string()), 1);
  EXPECT_EQ(run_cli("run -c " + (dir / "nope.json").string()), 1);
  EXPECT_EQ(run_cli("run -c " + (dir / "small.json").string() + " -o " + (dir / "out").string()), 0);
  const std::string digest = load_config(dir / "small.json").digest();
  EXPECT_EQ(run_cli("replay " + digest + " --root " + (dir / "out").string()), 0);
  std::ofstream(dir / "out" / digest / "trace_seed0.csv", std::ios::app) << "x\n";
  EXPECT_EQ(run_cli("replay " + digest + " --root " + (dir / "out").string()), 2);
  fs::remove_all(dir);
}
#endif

}  // namespace
}  // namespace ctxmpc
