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

#include "ctxmpc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "ctxmpc/error.hpp"
#include "ctxmpc/log.hpp"
#include "ctxmpc/mpc.hpp"

namespace ctxmpc {

namespace {

SeedRun run_seed(const Scenario& scenario, std::uint64_t seed, bool analyze) {
  const LoopInputs in = scenario.inputs(seed);
  const auto d = embed_all(*in.encoder, in.contexts);
  SeedRun r;
  r.seed = seed;
  r.trace = run_closed_loop(in, d, scenario.tuning);
  r.cost = total_cost(r.trace, *in.model);
  if (analyze) {
    r.gap = verify_cost_gap(*in.model, r.trace);
    if (scenario.tuned) {
      r.hindsight = hindsight_theta(in, d, scenario.set);
      r.regret = regret(r.trace, in, d, r.hindsight->theta);
    }
  }
  return r;
}

std::vector<double> as_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

double ExperimentResult::mean_cost() const {
  double s = 0.0;
  for (const auto& r : runs) s += r.cost;
  return runs.empty() ? 0.0 : s / static_cast<double>(runs.size());
}

double ExperimentResult::mean_regret() const {
  double s = 0.0;
  for (const auto& r : runs) {
    if (!r.regret) throw Error("mean_regret: run was not analyzed");
    s += r.regret->regret;
  }
  return runs.empty() ? 0.0 : s / static_cast<double>(runs.size());
}

Vector ExperimentResult::mean_final_theta() const {
  if (runs.empty()) return Vector();
  Vector m = Vector::Zero(runs.front().trace.final_theta().size());
  for (const auto& r : runs) m += r.trace.final_theta();
  return m / static_cast<double>(runs.size());
}

nlohmann::json ExperimentResult::summary(const Scenario& scenario) const {
  nlohmann::json j;
  j["digest"] = digest;
  j["scenario"] = std::string(scenario_kind_name(scenario.config.kind));
  j["T"] = scenario.config.T;
  j["k"] = k;
  j["loss"] = std::string(loss_kind_name(scenario.config.loss));
  j["D"] = D ? nlohmann::json(*D) : nlohmann::json(nullptr);
  j["G"] = G ? nlohmann::json(*G) : nlohmann::json(nullptr);
  j["W"] = scenario.model->W();
  j["closed_loop_radius"] = scenario.model->closed_loop_radius();
  j["data_dir"] = scenario.config.data_dir.string();
  j["mean_cost"] = mean_cost();
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& r : runs) {
    nlohmann::json s = trace_summary(r.trace, *scenario.model);
    if (r.gap) s["cost_gap_residual"] = r.gap->residual;
    if (r.hindsight) {
      s["theta_star"] = as_vec(r.hindsight->theta);
      s["theta_star_degenerate"] = r.hindsight->degenerate;
    }
    if (r.regret) s["regret"] = r.regret->to_json();
    seeds.push_back(std::move(s));
  }
  j["seeds"] = std::move(seeds);
  if (!runs.empty() && runs.front().regret) j["mean_regret"] = mean_regret();
  j["mean_final_theta"] = as_vec(mean_final_theta());
  return j;
}

ExperimentResult run_scenario(const Scenario& scenario, const RunOptions& options) {
  ExperimentResult res;
  res.digest = scenario.config.digest();
  res.k = scenario.k;
  if (scenario.tuning && scenario.config.eta.rates.empty()) {
    res.D = scenario.tuning->schedule.D();
    res.G = scenario.tuning->schedule.G();
  }
  const auto& seeds = scenario.config.seeds;
  res.runs.resize(seeds.size());

  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(std::max<std::size_t>(seeds.size(), 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        res.runs[i] = run_seed(scenario, seeds[i], options.analyze);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return res;
}

ExperimentResult run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  return run_scenario(build_scenario(config), options);
}

std::string trace_csv_string(const RunTrace& trace) {
  std::ostringstream out;
  write_trace_csv(out, trace);
  return out.str();
}

std::filesystem::path write_outputs(const Scenario& scenario, const ExperimentResult& result,
                                    const std::filesystem::path& root) {
  const auto dir = root / result.digest;
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "config.json");
    out << scenario.config.to_json().dump(2) << '\n';
  }
  for (const auto& r : result.runs) {
    std::ofstream out(dir / ("trace_seed" + std::to_string(r.seed) + ".csv"), std::ios::binary);
    write_trace_csv(out, r.trace);
    if (!out) throw Error("cannot write trace for seed " + std::to_string(r.seed));
  }
  std::ofstream out(dir / "summary.json");
  out << result.summary(scenario).dump(2) << '\n';
  return dir;
}

ReplayReport replay(const std::filesystem::path& root, const std::string& digest,
                    const std::optional<std::filesystem::path>& data_dir) {
  const auto dir = root / digest;
  ScenarioConfig config = load_config(dir / "config.json");
  if (data_dir) {
    config.data_dir = *data_dir;
  } else {
    std::ifstream in(dir / "summary.json");
    if (!in) throw ConfigError("replay: missing summary.json in " + dir.string());
    config.data_dir = nlohmann::json::parse(in).at("data_dir").get<std::string>();
  }
  if (config.digest() != digest) {
    throw ConfigError("replay: stored config hashes to " + config.digest() + ", not " + digest);
  }
  const Scenario scenario = build_scenario(config);
  const ExperimentResult res = run_scenario(scenario, {.threads = 0, .analyze = false});
  ReplayReport rep;
  rep.digest = digest;
  for (const auto& r : res.runs) {
    const std::string name = "trace_seed" + std::to_string(r.seed) + ".csv";
    std::ifstream in(dir / name, std::ios::binary);
    std::ostringstream stored;
    stored << in.rdbuf();
    ++rep.compared;
    if (!in || stored.str() != trace_csv_string(r.trace)) rep.mismatched.push_back(name);
  }
  return rep;
}

LdSweep sweep_k(const Scenario& scenario, Index kmax, std::uint64_t seed, Index probes) {
  if (kmax < 1) throw ConfigError("sweep_k: kmax must be >= 1");
  const LoopInputs in = scenario.inputs(seed);
  const Index T = in.horizon();
  if (T < kmax + 2) throw ConfigError("sweep_k: horizon too short for kmax");
  const auto d = embed_all(*in.encoder, in.contexts);
  std::vector<Vector> known;
  for (Index t = 0; t < T; ++t) known.push_back(known_term(in, t));

  LdSweep out;
  out.log_rho = std::log(scenario.model->closed_loop_radius());
  std::vector<double> ks, logs;
  // Probes stay clear of the horizon end so every tail has the same length
  // scale; the last probe leaves at least `T / 2` steps of tail.
  const Index last_probe = T / 2;
  for (Index k = 1; k <= kmax; ++k) {
    const LossSpec loss = LossSpec::make(scenario.config.loss, *in.model, k, scenario.config.normalizer);
    LdSweepPoint pt;
    pt.k = k;
    for (Index i = 0; i < probes; ++i) {
      const Index t = probes > 1 ? i * last_probe / (probes - 1) : 0;
      const LdProbe probe = ld_probe(*in.model, in.w, d, known, t, k);
      pt.ld = std::max(pt.ld, estimate_ld(loss, *in.model, in.decoder, scenario.set, probe));
    }
    const LdProbe end_probe = ld_probe(*in.model, in.w, d, known, T - k, k);
    pt.ld_at_end = estimate_ld(loss, *in.model, in.decoder, scenario.set, end_probe);
    out.points.push_back(pt);
    if (pt.ld > 0.0) {
      ks.push_back(static_cast<double>(k));
      logs.push_back(std::log(pt.ld));
    }
  }
  if (ks.size() >= 2) out.fit = fit_line(ks, logs);
  return out;
}

}  // namespace ctxmpc
