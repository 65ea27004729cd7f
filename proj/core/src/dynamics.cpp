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

#include "ctxmpc/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "ctxmpc/error.hpp"
#include "ctxmpc/rng.hpp"

namespace ctxmpc {

Vector step(const SystemModel& model, const Vector& x, const Vector& u, const Vector& w) {
  if (x.size() != model.n() || w.size() != model.n() || u.size() != model.m()) {
    throw DimensionError("step: state/input/disturbance dimension mismatch");
  }
  return model.A() * x + model.B() * u + w;
}

double stage_cost(const SystemModel& model, const Vector& x, const Vector& u) {
  return x.dot(model.Q() * x) + u.dot(model.R() * u);
}

double terminal_cost(const SystemModel& model, const Vector& x) { return x.dot(model.P() * x); }

std::vector<Vector> disturbance_feedforward(const SystemModel& model, std::span<const Vector> w) {
  const auto T = w.size();
  std::vector<Vector> s(T + 1, Vector::Zero(model.n()));
  const Matrix Ft = model.F().transpose();
  for (std::size_t t = T; t-- > 0;) {
    if (w[t].size() != model.n()) throw DimensionError("disturbance has wrong dimension");
    s[t] = model.P() * w[t] + Ft * s[t + 1];
  }
  return s;
}

Rollout optimal_rollout(const SystemModel& model, const Vector& x0, std::span<const Vector> w) {
  if (x0.size() != model.n()) throw DimensionError("optimal_rollout: x0 has wrong dimension");
  const auto s = disturbance_feedforward(model, w);
  Rollout r;
  r.states.reserve(w.size() + 1);
  r.inputs.reserve(w.size());
  Vector x = x0;
  for (std::size_t t = 0; t < w.size(); ++t) {
    Vector u = model.feedback(x, s[t]);
    r.cost += stage_cost(model, x, u);
    r.states.push_back(x);
    x = step(model, x, u, w[t]);
    r.inputs.push_back(std::move(u));
  }
  r.cost += terminal_cost(model, x);
  r.states.push_back(std::move(x));
  return r;
}

double optimal_cost(const SystemModel& model, const Vector& x0, std::span<const Vector> w) {
  return optimal_rollout(model, x0, w).cost;
}

namespace {

struct Generator {
  Index n;
  Index T;

  DisturbanceRealization operator()(const ScriptedTrace& src) const {
    if (static_cast<Index>(src.values.size()) < T) {
      throw ConfigError("scripted disturbance trace is shorter than the horizon");
    }
    DisturbanceRealization out;
    out.w.assign(src.values.begin(), src.values.begin() + T);
    for (const auto& w : out.w) {
      if (w.size() != n) throw DimensionError("scripted disturbance has wrong dimension");
    }
    out.known.assign(static_cast<std::size_t>(T), Vector::Zero(n));
    return out;
  }

  DisturbanceRealization operator()(const UniformWindComposite& src) const {
    if (n != 4) throw DimensionError("wind composite disturbance requires a 4-state model");
    if (static_cast<Index>(src.reference.size()) < T + 1) {
      throw ConfigError("reference trajectory must have T + 1 samples");
    }
    CounterRng rng(src.seed, /*stream=*/1);
    DisturbanceRealization out;
    out.w.reserve(static_cast<std::size_t>(T));
    for (Index t = 0; t < T; ++t) {
      const auto& y0 = src.reference[static_cast<std::size_t>(t)];
      const auto& y1 = src.reference[static_cast<std::size_t>(t) + 1];
      Vector known(4);
      // A y_t - y_{t+1} for y = (position, 0): the position rows only.
      known << y0[0] - y1[0], y0[1] - y1[1], 0.0, 0.0;
      Vector wind(2);
      wind(0) = rng.uniform(-src.half_range, src.half_range);
      wind(1) = rng.uniform(-src.half_range, src.half_range);
      Vector w = known;
      w(2) -= src.gain * wind(0);
      w(3) -= src.gain * wind(1);
      out.w.push_back(std::move(w));
      out.known.push_back(std::move(known));
      out.wind.push_back(std::move(wind));
    }
    return out;
  }

  DisturbanceRealization operator()(const IidStochastic& src) const {
    if (src.mean.size() != n || src.half_width.size() != n) {
      throw DimensionError("iid disturbance parameters have wrong dimension");
    }
    CounterRng rng(src.seed, /*stream=*/2);
    DisturbanceRealization out;
    out.w.reserve(static_cast<std::size_t>(T));
    for (Index t = 0; t < T; ++t) {
      Vector w(n);
      for (Index i = 0; i < n; ++i) {
        w(i) = src.mean(i) + rng.uniform(-src.half_width(i), src.half_width(i));
      }
      out.w.push_back(std::move(w));
    }
    out.known.assign(static_cast<std::size_t>(T), Vector::Zero(n));
    return out;
  }
};

}  // namespace

DisturbanceRealization generate(const DisturbanceSource& source, Index n, Index T) {
  if (T < 0) throw ConfigError("horizon must be nonnegative");
  return std::visit(Generator{n, T}, source);
}

double wind_composite_bound(double max_displacement, double half_range, double gain) {
  const double v = gain * half_range;
  return std::sqrt(max_displacement * max_displacement + 2.0 * v * v);
}

}  // namespace ctxmpc
