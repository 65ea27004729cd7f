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
#include <span>
#include <variant>
#include <vector>

#include "ctxmpc/lqr.hpp"
#include "ctxmpc/types.hpp"

namespace ctxmpc {

// x_{t+1} = A x_t + B u_t + w_t.
Vector step(const SystemModel& model, const Vector& x, const Vector& u, const Vector& w);

double stage_cost(const SystemModel& model, const Vector& x, const Vector& u);
double terminal_cost(const SystemModel& model, const Vector& x);

struct Rollout {
  std::vector<Vector> states;  // T + 1 entries
  std::vector<Vector> inputs;  // T entries
  double cost = 0.0;
};

// Closed loop under the hindsight-optimal input
//   u_t = -(R + B'PB)^{-1} B' (P A x_t + sum_{tau >= t} (F')^{tau-t} P w_tau),
// i.e. the exact minimizer of the finite-horizon quadratic cost with terminal
// weight P when the whole disturbance sequence is known.
Rollout optimal_rollout(const SystemModel& model, const Vector& x0, std::span<const Vector> w);
double optimal_cost(const SystemModel& model, const Vector& x0, std::span<const Vector> w);

// s_t = sum_{tau=t}^{T-1} (F')^{tau-t} P w_tau for every t, computed by the
// backward recursion s_t = P w_t + F' s_{t+1}. Entry T is zero.
std::vector<Vector> disturbance_feedforward(const SystemModel& model, std::span<const Vector> w);

// ----------------------------------------------------------------------------
// Disturbance sources. Identical parameters and seed always emit the identical
// sequence (see CounterRng).

struct ScriptedTrace {
  std::vector<Vector> values;
};

// Drone tracking composite: w_t = A y_t - y_{t+1} + Z_t where y is the padded
// reference (position, zero velocity) and Z_t = (0, 0, -0.2 Z1, -0.2 Z2) with
// Z1, Z2 ~ U(-half_range, half_range).
struct UniformWindComposite {
  std::vector<std::array<double, 2>> reference;  // T + 1 sampled positions
  double half_range = 20.0;
  double gain = 0.2;
  std::uint64_t seed = 0;
};

struct IidStochastic {
  Vector mean;
  Vector half_width;  // uniform on mean +- half_width, per coordinate
  std::uint64_t seed = 0;
};

using DisturbanceSource = std::variant<ScriptedTrace, UniformWindComposite, IidStochastic>;

struct DisturbanceRealization {
  std::vector<Vector> w;
  // Part of w the controller is told about ahead of time (the reference term
  // for the drone); zero elsewhere.
  std::vector<Vector> known;
  // Raw wind draws (Z1, Z2) for the composite source; empty otherwise.
  std::vector<Vector> wind;
};

// n is the state dimension; T the number of steps.
DisturbanceRealization generate(const DisturbanceSource& source, Index n, Index T);

// Analytic supremum of ||A y_t - y_{t+1} + Z_t|| for a reference that moves at
// most `max_displacement` per step.
double wind_composite_bound(double max_displacement, double half_range, double gain);

}  // namespace ctxmpc
