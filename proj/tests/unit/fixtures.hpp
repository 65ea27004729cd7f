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

// Seeded random problem instances shared by the unit and acceptance tests.

#include "ctxmpc/config.hpp"
#include "ctxmpc/lqr.hpp"
#include "ctxmpc/mpc.hpp"
#include "ctxmpc/rng.hpp"

namespace ctxmpc::testing {

inline Matrix random_matrix(CounterRng& rng, Index rows, Index cols, double scale = 1.0) {
  Matrix M(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = scale * rng.uniform(-1.0, 1.0);
  return M;
}

inline Vector random_vector(CounterRng& rng, Index n, double scale = 1.0) {
  return random_matrix(rng, n, 1, scale).col(0);
}

// Random SPD matrix with eigenvalues bounded below by `floor`.
inline Matrix random_spd(CounterRng& rng, Index n, double floor = 0.1) {
  const Matrix M = random_matrix(rng, n, n);
  return M * M.transpose() + floor * Matrix::Identity(n, n);
}

struct MpcInstance {
  SystemModel model;
  Vector x;
  PredictionWindow window;
};

// n <= 5, m <= 3, k <= 10.
inline MpcInstance random_mpc_instance(std::uint64_t seed) {
  CounterRng rng(seed, 21);
  const Index n = static_cast<Index>(rng.uniform_int(1, 5));
  const Index m = static_cast<Index>(rng.uniform_int(1, 3));
  const Index k = static_cast<Index>(rng.uniform_int(1, 10));
  Matrix A = random_matrix(rng, n, n, 0.8);
  Matrix B = random_matrix(rng, n, m);
  SystemModel model = SystemModel::create(A, B, random_spd(rng, n), random_spd(rng, m), 1.0);
  PredictionWindow window;
  window.t = 0;
  window.k = k;
  for (Index i = 0; i < k; ++i) window.predictions.push_back(random_vector(rng, n));
  return {std::move(model), random_vector(rng, n, 2.0), std::move(window)};
}

// Scalar plant A = B = Q = R = 1 with w ~ U(mean - half, mean + half).
inline ScenarioConfig scalar_custom_config(Index T, std::optional<Index> k, std::string context,
                                           double mean, double half,
                                           std::string decoder = "full") {
  ScenarioConfig c;
  c.kind = ScenarioKind::Custom;
  c.T = T;
  c.k = k;
  c.custom.A = c.custom.B = c.custom.Q = c.custom.R = Matrix::Identity(1, 1);
  c.custom.w_mean = {mean};
  c.custom.w_half_width = {half};
  c.custom.context = std::move(context);
  c.custom.decoder = std::move(decoder);
  return c;
}

}  // namespace ctxmpc::testing
