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

#include "ctxmpc/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ctxmpc/dynamics.hpp"
#include "ctxmpc/error.hpp"
#include "ctxmpc/job_encoder.hpp"
#include "ctxmpc/mpc.hpp"
#include "ctxmpc/rng.hpp"

namespace ctxmpc {

namespace {

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

HypothesisSet make_set(const ScenarioConfig& c, Index dim, double default_radius) {
  Vector center = Vector::Zero(dim);
  if (c.theta.center) {
    if (static_cast<Index>(c.theta.center->size()) != dim) {
      throw ConfigError("theta.center must have " + std::to_string(dim) + " entries");
    }
    center = to_vector(*c.theta.center);
  }
  return HypothesisSet(center, c.theta.radius.value_or(default_radius));
}

Vector make_theta0(const ScenarioConfig& c, const HypothesisSet& set) {
  if (!c.theta.init) return set.center();
  if (static_cast<Index>(c.theta.init->size()) != set.center().size()) {
    throw ConfigError("theta.init must have " + std::to_string(set.center().size()) + " entries");
  }
  return to_vector(*c.theta.init);
}

Vector make_x0(const std::optional<std::vector<double>>& x0, Index n) {
  if (!x0) return Vector::Zero(n);
  if (static_cast<Index>(x0->size()) != n) throw ConfigError("x0 has the wrong length");
  return to_vector(*x0);
}

// Uniform point in the ball.
Vector sample_ball(const HypothesisSet& set, CounterRng& rng) {
  const Index q = set.center().size();
  if (q == 0) return Vector(0);
  Vector u(q);
  for (Index i = 0; i < q; ++i) u(i) = rng.normal();
  const double r = set.radius() * std::pow(rng.uniform(), 1.0 / static_cast<double>(q));
  return set.center() + r * u.normalized();
}

// Fills k, the tuning rule and the gradient bound from a calibration
// realization that no experiment seed uses.
void finish(Scenario& s) {
  const ScenarioConfig& c = s.config;
  s.k = c.k.value_or(default_horizon(s.model->closed_loop_radius(), c.T));
  s.x0 = s.x0.size() ? s.x0 : Vector::Zero(s.model->n());
  if (!s.tuned) return;

  const LossSpec loss = LossSpec::make(c.loss, *s.model, s.k, c.normalizer);
  if (!c.eta.rates.empty()) {
    s.tuning = TuningSetup{loss, s.set, LearningRateSchedule::explicit_rates(c.eta.rates)};
    return;
  }
  const double D = c.eta.D.value_or(s.set.diameter());
  double G = 0.0;
  if (c.eta.G) {
    G = *c.eta.G;
  } else {
    const Realization cal = s.realize(c.eta.calibration_seed);
    const auto d = embed_all(*s.encoder, cal.contexts);
    const Index n = s.model->n();
    auto known = [&](Index tau) {
      const Vector& kv = cal.contexts[static_cast<std::size_t>(tau)].known;
      return kv.size() ? kv : Vector(Vector::Zero(n));
    };
    const Index calT = static_cast<Index>(cal.w.size());
    WindowSampler sampler = [&](CounterRng& rng) {
      const Vector theta = sample_ball(s.set, rng);
      const auto t = static_cast<Index>(rng.uniform_int(0, static_cast<std::uint64_t>(calT - 1)));
      std::vector<WindowSample> window;
      for (Index tau = t; tau <= horizon_end(t, s.k, calT); ++tau) {
        const auto i = static_cast<std::size_t>(tau);
        window.push_back({cal.w[i], d[i], known(tau)});
      }
      return std::make_pair(theta, window);
    };
    if (calT == 0) {
      s.gradient_bound = {1.0, 0.0, true};
    } else {
      s.gradient_bound = gradient_bound_estimate(loss, s.decoder, sampler,
                                                 c.eta.calibration_samples,
                                                 c.eta.calibration_seed, c.eta.safety);
    }
    G = s.gradient_bound.value;
  }
  s.tuning = TuningSetup{loss, s.set, LearningRateSchedule::from_bounds(D, G, s.k)};
}

// Reads level labels straight from the catalog: the ground truth the
// synthetic generator plants.
class CatalogClassifier final : public JobClassifier {
 public:
  explicit CatalogClassifier(const JobCatalog& catalog) {
    for (const auto& j : catalog.jobs) levels_[j.description] = j.levels;
  }
  ClassificationResult classify(const ClassificationRequest& request) override {
    ClassificationResult r = all_zero(request);
    auto it = levels_.find(request.description);
    if (it == levels_.end()) return r;
    for (const auto& ch : request.channels) {
      auto lv = it->second.find(ch);
      if (lv != it->second.end()) r.levels[ch] = lv->second;
    }
    return r;
  }

 private:
  std::map<std::string, std::map<std::string, int>> levels_;
};

}  // namespace

LoopInputs Scenario::inputs(std::uint64_t seed) const {
  Realization r = realize(seed);
  LoopInputs in;
  in.model = model;
  in.k = k;
  in.x0 = x0;
  in.w = std::move(r.w);
  in.contexts = std::move(r.contexts);
  in.encoder = encoder;
  in.decoder = decoder;
  in.theta0 = theta0;
  in.clip = config.clip;
  in.seed = seed;
  in.config_digest = config.digest();
  if (hindsight_mean_bias) {
    Vector mean = Vector::Zero(model->n());
    for (const auto& w : in.w) mean += w;
    if (!in.w.empty()) mean /= static_cast<double>(in.w.size());
    in.decoder = AffineDecoder::fixed({Matrix::Zero(model->n(), encoder->dim()), mean});
  }
  return in;
}

Index default_horizon(double rho, Index T) {
  if (T <= 1 || !(rho > 0.0)) return 1;
  if (rho >= 1.0) throw ConfigError("default horizon needs a stable closed loop");
  const double k = std::log(static_cast<double>(T)) / std::log(1.0 / rho);
  return std::max<Index>(1, static_cast<Index>(std::ceil(k - 1e-12)));
}

double closed_path_length(const std::vector<std::array<double, 2>>& p) {
  double len = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& a = p[i];
    const auto& b = p[(i + 1) % p.size()];
    len += std::hypot(b[0] - a[0], b[1] - a[1]);
  }
  return len;
}

std::vector<std::array<double, 2>> sample_closed_path(
    const std::vector<std::array<double, 2>>& p, double step, Index count) {
  const double total = closed_path_length(p);
  if (!(total > 0.0)) throw ConfigError("reference path has zero length");
  std::vector<double> cum(p.size() + 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& a = p[i];
    const auto& b = p[(i + 1) % p.size()];
    cum[i + 1] = cum[i] + std::hypot(b[0] - a[0], b[1] - a[1]);
  }
  std::vector<std::array<double, 2>> out;
  out.reserve(static_cast<std::size_t>(count));
  std::size_t seg = 0;
  for (Index t = 0; t < count; ++t) {
    const double s = std::fmod(step * static_cast<double>(t), total);
    if (s < cum[seg]) seg = 0;
    while (seg + 1 < cum.size() - 1 && s >= cum[seg + 1]) ++seg;
    const auto& a = p[seg];
    const auto& b = p[(seg + 1) % p.size()];
    const double len = cum[seg + 1] - cum[seg];
    const double f = len > 0.0 ? (s - cum[seg]) / len : 0.0;
    out.push_back({a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])});
  }
  return out;
}

SystemModel drone_model(double W) {
  Matrix A(4, 4);
  A << 1, 0, 0.2, 0,
       0, 1, 0, 0.2,
       0, 0, 1, 0,
       0, 0, 0, 1;
  Matrix B(4, 2);
  B << 0, 0,
       0, 0,
       0.2, 0,
       0, 0.2;
  const Matrix Q = (Vector(4) << 1, 1, 0, 0).finished().asDiagonal();
  const Matrix R = (Vector(2) << 1e-4, 1e-4).finished().asDiagonal();
  return SystemModel::create(A, B, Q, R, W);
}

Scenario build_drone_scenario(const ScenarioConfig& config) {
  if (config.encoder != EncoderSource::Scripted) {
    throw ConfigError("drone scenario supports the scripted encoder only");
  }
  Scenario s;
  s.config = config;
  const double step = config.drone.speed * config.drone.period;
  const double W = wind_composite_bound(step, config.drone.wind_half_range, config.drone.wind_gain);
  s.model = std::make_shared<const SystemModel>(drone_model(W));
  s.encoder = std::make_shared<const MetadataEncoder>(std::vector<std::string>{"wind_x", "wind_y"});
  // theta = (C(2,0), C(3,1)): the wind coefficients on the velocity rows.
  s.decoder = AffineDecoder(4, 2, {2, 7}, {Matrix::Zero(4, 2), Vector::Zero(4)});
  s.set = make_set(config, 2, 0.6);
  s.theta0 = make_theta0(config, s.set);
  s.x0 = make_x0(config.drone.x0, 4);

  const auto reference = sample_closed_path(config.drone.path, step, config.T + 1);
  const DroneConfig dc = config.drone;
  const Index T = config.T;
  s.realize = [reference, dc, T](std::uint64_t seed) {
    UniformWindComposite src{reference, dc.wind_half_range, dc.wind_gain, seed};
    DisturbanceRealization d = generate(src, 4, T);
    Realization r;
    r.w = std::move(d.w);
    r.contexts.reserve(static_cast<std::size_t>(T));
    for (Index t = 0; t < T; ++t) {
      const auto i = static_cast<std::size_t>(t);
      ContextRecord rec;
      rec.start = static_cast<double>(t);
      rec.end = static_cast<double>(t + 1);
      rec.channel = "wind";
      rec.description = "wind report";
      rec.source = ContextSource::Scripted;
      rec.metadata = {{"wind_x", d.wind[i](0)}, {"wind_y", d.wind[i](1)}};
      r.contexts.push_back({t, {std::move(rec)}, std::move(d.known[i])});
    }
    return r;
  };
  finish(s);
  return s;
}

JobCatalog JobCatalog::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open job catalog " + path.string());
  JobCatalog c;
  try {
    const auto j = nlohmann::json::parse(in);
    c.channels = j.at("channels").get<std::vector<std::string>>();
    for (const auto& e : j.at("jobs")) {
      CatalogJob job;
      job.id = e.at("id").get<std::string>();
      job.channel = e.at("channel").get<std::string>();
      job.description = e.at("description").get<std::string>();
      job.levels = e.at("levels").get<std::map<std::string, int>>();
      job.metadata = e.at("metadata").get<std::map<std::string, double>>();
      job.duration = e.at("duration").get<std::array<Index, 2>>();
      if (job.duration[0] < 1 || job.duration[1] < job.duration[0]) {
        throw ConfigError("job " + job.id + ": bad duration range");
      }
      c.jobs.push_back(std::move(job));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("job catalog " + path.string() + ": " + e.what());
  }
  return c;
}

std::vector<std::string> battery_metadata_keys() {
  return {"cpu-ws1.cores", "cpu-ws1.kfiles", "cpu-ws2.cores",
          "cpu-ws2.kfiles", "gpu-ws1.gparams", "gpu-ws1.adam"};
}

std::vector<double> battery_metadata_scales(const JobCatalog& catalog) {
  std::vector<double> scales;
  for (const auto& key : battery_metadata_keys()) {
    double m = 0.0;
    for (const auto& job : catalog.jobs) {
      auto it = job.metadata.find(key);
      if (it != job.metadata.end()) m = std::max(m, std::abs(it->second));
    }
    scales.push_back(m > 0.0 ? m : 1.0);
  }
  return scales;
}

Realization battery_realization(const JobCatalog& catalog, const BatteryConfig& cfg, Index T,
                                std::uint64_t seed) {
  const std::size_t nch = catalog.channels.size();
  CounterRng sched(seed, /*stream=*/3);
  CounterRng noise(seed, /*stream=*/4);

  std::vector<std::pair<ContextRecord, const CatalogJob*>> jobs;
  for (const auto& ch : catalog.channels) {
    std::vector<const CatalogJob*> pool;
    for (const auto& j : catalog.jobs) {
      if (j.channel == ch) pool.push_back(&j);
    }
    if (pool.empty()) continue;
    Index t = 0;
    while (true) {
      const Index start = t + static_cast<Index>(sched.uniform_int(
                                  static_cast<std::uint64_t>(cfg.gap[0]),
                                  static_cast<std::uint64_t>(cfg.gap[1])));
      if (start >= T) break;
      const CatalogJob* job = pool[sched.uniform_int(0, pool.size() - 1)];
      const Index dur = static_cast<Index>(sched.uniform_int(
          static_cast<std::uint64_t>(job->duration[0]), static_cast<std::uint64_t>(job->duration[1])));
      const Index end = std::min(start + dur, T);
      ContextRecord rec;
      rec.start = static_cast<double>(start);
      rec.end = static_cast<double>(end);
      rec.channel = ch;
      rec.description = job->description;
      rec.source = ContextSource::Log;
      rec.metadata = job->metadata;
      jobs.emplace_back(std::move(rec), job);
      t = end;
    }
  }

  Realization r;
  r.w.reserve(static_cast<std::size_t>(T));
  r.contexts.resize(static_cast<std::size_t>(T));
  std::vector<std::vector<int>> level(static_cast<std::size_t>(T), std::vector<int>(nch, 0));
  for (const auto& [rec, job] : jobs) {
    for (Index t = static_cast<Index>(rec.start); t < static_cast<Index>(rec.end); ++t) {
      r.contexts[static_cast<std::size_t>(t)].records.push_back(rec);
      for (std::size_t i = 0; i < nch; ++i) {
        auto it = job->levels.find(catalog.channels[i]);
        if (it != job->levels.end()) {
          auto& l = level[static_cast<std::size_t>(t)][i];
          l = std::max(l, it->second);
        }
      }
    }
  }
  for (Index t = 0; t < T; ++t) {
    auto& ctx = r.contexts[static_cast<std::size_t>(t)];
    ctx.step = t;
    double w = cfg.bias;
    for (std::size_t i = 0; i < nch; ++i) {
      w += cfg.effects[i] * level[static_cast<std::size_t>(t)][i];
    }
    w += noise.uniform(-cfg.noise_half_width, cfg.noise_half_width);
    r.w.push_back(Vector::Constant(1, w));
  }
  return r;
}

Scenario build_battery_scenario(const ScenarioConfig& config) {
  Scenario s;
  s.config = config;
  const BatteryConfig& bc = config.battery;
  const auto catalog = std::make_shared<const JobCatalog>(JobCatalog::load(config.resolve(bc.catalog)));
  if (catalog->channels.size() != bc.effects.size()) {
    throw ConfigError("battery: catalog channels and effects differ in length");
  }
  double W = std::abs(bc.bias) + bc.noise_half_width;
  for (double e : bc.effects) W += 3.0 * std::abs(e);
  const Matrix one = Matrix::Ones(1, 1);
  s.model = std::make_shared<const SystemModel>(SystemModel::create(
      one, one, bc.state_weight * one, bc.input_weight * one, W));

  const Index p_llm = static_cast<Index>(catalog->channels.size());
  switch (bc.variant) {
    case PredictorVariant::LlmEmbedding: {
      std::shared_ptr<JobClassifier> classifier;
      switch (config.encoder) {
        case EncoderSource::LlmFixture:
          classifier = std::make_shared<FixtureClassifier>(
              std::make_shared<const FixtureStore>(config.resolve(bc.fixtures).string()), bc.miss);
          break;
        case EncoderSource::Llm:
          classifier = std::make_shared<LlmClient>(LlmClient::from_environment(
              {}, std::make_shared<FixtureStore>(config.resolve(bc.fixtures).string())));
          break;
        case EncoderSource::Categorical:
          classifier = std::make_shared<CatalogClassifier>(*catalog);
          break;
        case EncoderSource::Scripted:
          throw ConfigError("battery llm-embedding needs llm, llm-fixture or categorical");
      }
      s.encoder = std::make_shared<const JobEffortEncoder>(catalog->channels, classifier);
      s.decoder = AffineDecoder::full(1, p_llm);
      break;
    }
    case PredictorVariant::Metadata:
      s.encoder = std::make_shared<const MetadataEncoder>(battery_metadata_keys(),
                                                         battery_metadata_scales(*catalog));
      s.decoder = AffineDecoder::full(1, s.encoder->dim());
      break;
    case PredictorVariant::BiasOnly:
      s.encoder = std::make_shared<const MetadataEncoder>(std::vector<std::string>{});
      s.decoder = AffineDecoder::bias_only(1, 0);
      break;
    case PredictorVariant::FixedAverage:
    case PredictorVariant::FixedZero:
      s.encoder = std::make_shared<const MetadataEncoder>(std::vector<std::string>{});
      s.decoder = AffineDecoder::fixed({Matrix::Zero(1, 0), Vector::Zero(1)});
      s.tuned = false;
      s.hindsight_mean_bias = bc.variant == PredictorVariant::FixedAverage;
      break;
  }
  s.set = make_set(config, s.decoder.dim(), 600.0);
  s.theta0 = make_theta0(config, s.set);
  const Index T = config.T;
  const BatteryConfig cfg = bc;
  s.realize = [catalog, cfg, T](std::uint64_t seed) {
    return battery_realization(*catalog, cfg, T, seed);
  };
  finish(s);
  return s;
}

Scenario build_custom_scenario(const ScenarioConfig& config) {
  const CustomConfig& cc = config.custom;
  Scenario s;
  s.config = config;
  const Vector mean = to_vector(cc.w_mean);
  const Vector half = to_vector(cc.w_half_width);
  const double W = cc.W.value_or((mean.cwiseAbs() + half.cwiseAbs()).norm());
  s.model = std::make_shared<const SystemModel>(SystemModel::create(cc.A, cc.B, cc.Q, cc.R, W));
  const Index n = s.model->n();

  std::vector<std::string> keys;
  const Index p = cc.context == "none" ? 0 : cc.context == "disturbance" ? n : cc.context_dim;
  for (Index i = 0; i < p; ++i) keys.push_back("d" + std::to_string(i));
  s.encoder = std::make_shared<const MetadataEncoder>(keys);
  s.decoder = cc.decoder == "full" ? AffineDecoder::full(n, p) : AffineDecoder::bias_only(n, p);
  s.set = make_set(config, s.decoder.dim(), std::max(1.0, 2.0 * W));
  s.theta0 = make_theta0(config, s.set);
  s.x0 = make_x0(cc.x0, n);

  const Index T = config.T;
  const std::string mode = cc.context;
  const double h = cc.context_half_width;
  s.realize = [mean, half, n, p, T, mode, h, keys](std::uint64_t seed) {
    DisturbanceRealization d = generate(IidStochastic{mean, half, seed}, n, T);
    CounterRng ctx(seed, /*stream=*/5);
    Realization r;
    r.contexts.reserve(static_cast<std::size_t>(T));
    for (Index t = 0; t < T; ++t) {
      StepContext c{t, {}, Vector()};
      if (p > 0) {
        ContextRecord rec;
        rec.start = static_cast<double>(t);
        rec.end = static_cast<double>(t + 1);
        rec.channel = "synthetic";
        for (Index i = 0; i < p; ++i) {
          rec.metadata[keys[static_cast<std::size_t>(i)]] =
              mode == "disturbance" ? d.w[static_cast<std::size_t>(t)](i) : ctx.uniform(-h, h);
        }
        c.records.push_back(std::move(rec));
      }
      r.contexts.push_back(std::move(c));
    }
    r.w = std::move(d.w);
    return r;
  };
  finish(s);
  return s;
}

Scenario build_scenario(const ScenarioConfig& config) {
  switch (config.kind) {
    case ScenarioKind::Drone: return build_drone_scenario(config);
    case ScenarioKind::Battery: return build_battery_scenario(config);
    case ScenarioKind::Custom: return build_custom_scenario(config);
  }
  throw ConfigError("unknown scenario kind");
}

}  // namespace ctxmpc
