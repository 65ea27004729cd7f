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

#include <cstddef>
#include <vector>

#include "ctxmpc/lqr.hpp"
#include "ctxmpc/types.hpp"

namespace ctxmpc {

// min(t + k - 1, T - 1).
Index horizon_end(Index t, Index k, Index T);

// Disturbance predictions what_{tau|t} for tau = t .. horizon_end.
struct PredictionWindow {
  Index t = 0;
  Index k = 1;
  std::vector<Vector> predictions;
  std::size_t clipped = 0;  // how many entries were pulled back into the W-ball

  Index horizon_end() const { return t + static_cast<Index>(predictions.size()) - 1; }
};

// Radial projection onto {w : ||w|| <= radius}. Sets *clipped when it moved w.
Vector clip_to_ball(const Vector& w, double radius, bool* clipped = nullptr);

// Prediction-augmented MPC in closed form:
//   u_t = -(R + B'PB)^{-1} B' (P A x_t + sum_{tau=t}^{T_end} (F')^{tau-t} P what_{tau|t}).
// The weighted powers (F')^i P, i < k, are computed once at construction.
class MpcController {
 public:
  MpcController(SystemModel model, Index k);

  Vector action(const Vector& x, const PredictionWindow& window) const;
  // sum_i (F')^i P what_{t+i|t}
  Vector feedforward(const std::vector<Vector>& predictions) const;

  const SystemModel& model() const { return model_; }
  Index k() const { return k_; }
  const std::vector<Matrix>& weights() const { return weights_; }

 private:
  SystemModel model_;
  Index k_;
  std::vector<Matrix> weights_;
};

// One-shot convenience wrapper around MpcController.
Vector mpc_action_explicit(const SystemModel& model, const Vector& x,
                           const PredictionWindow& window);

// Solves the finite-horizon program directly: states are eliminated and the
// resulting dense quadratic in (u_t, ..., u_{T_end}) is minimized through its
// normal equations. Returns the whole open-loop sequence; only the first
// element is meant to be applied. Serves as the reference for
// mpc_action_explicit.
std::vector<Vector> mpc_action_batch(const SystemModel& model, const Vector& x,
                                     const PredictionWindow& window);

}  // namespace ctxmpc
