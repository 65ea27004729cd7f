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

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxmpc/closed_loop.hpp"
#include "ctxmpc/losses.hpp"
#include "ctxmpc/lqr.hpp"
#include "ctxmpc/trace.hpp"

namespace ctxmpc {

// Per step: psi_t = sum_{tau=t}^{T-1} (F')^{tau-t} P w_tau - sum_{tau=t}^{T_end} (F')^{tau-t} P what_{tau|t}
// (full horizon) and psi_hat_t, which truncates the first sum at T_end. Both
// use the predictions exactly as applied in the trace.
struct PsiSequence {
  std::vector<Vector> psi;
  std::vector<Vector> psi_hat;
};

PsiSequence psi_sequence(const SystemModel& model, const RunTrace& trace);

struct CostGap {
  double cost = 0.0;        // J(pi)
  double optimal = 0.0;     // J*
  double psi_energy = 0.0;  // sum psi' H psi
  double residual = 0.0;    // |(J - J*) - sum psi' H psi| / max(1, J*)
};

// Throws TraceError when some recorded input is not of the form
// -(R + B'PB)^{-1} B' (P A x + feedforward(predictions)).
CostGap verify_cost_gap(const SystemModel& model, const RunTrace& trace);

// sum_t ||a_t - J_t theta||_H^2 = theta' M theta - 2 v' theta + c, where
// psi_t(theta) = a_t - J_t theta with the decoder evaluated at theta for every
// tau of the window (clipping ignored).
struct HindsightProblem {
  Matrix M;
  Vector v;
  double c = 0.0;
  double objective(const Vector& theta) const;
};

HindsightProblem hindsight_problem(const LoopInputs& inputs, const std::vector<Vector>& embeddings);

struct HindsightResult {
  Vector theta;
  double objective = 0.0;
  bool degenerate = false;   // normal matrix rank-deficient; minimum-norm solution used
  bool on_boundary = false;  // unconstrained minimizer was outside the set
};

// Minimizes the quadratic over the ball. Inside: the (minimum-norm)
// solution of M theta = v. Outside: the boundary point where
// (M + lambda I) theta = v + lambda center, lambda > 0 found by bisection.
HindsightResult minimize_over_ball(const HindsightProblem& problem, const HypothesisSet& set);

HindsightResult hindsight_theta(const LoopInputs& inputs, const std::vector<Vector>& embeddings,
                                const HypothesisSet& set);

struct RegretReport {
  double cost = 0.0;       // J(theta_{1:T})
  double cost_star = 0.0;  // J(theta*) from closed-loop replay
  double regret = 0.0;
  // sum_t psi_t(theta_t)' H psi_t(theta_t) - psi_t(theta*)' H psi_t(theta*)
  // with psi built from the applied predictions of both runs.
  double decomposed = 0.0;
  double identity_residual = 0.0;  // |regret - decomposed| / max(1, |regret|)
  double normalized = 0.0;         // regret / sqrt(T log T)
  Vector theta_star;
  std::vector<double> excess;       // psi_t' H psi_t of the run
  std::vector<double> excess_star;  // same for the replay
  // Running sum of excess - excess_star, i.e. the regret accumulated up to t.
  std::vector<double> cumulative() const;
  nlohmann::json to_json() const;
};

// Replays the loop with theta frozen at theta_star on the same disturbances.
// Throws TraceError when the trace does not belong to these inputs.
RegretReport regret(const RunTrace& trace, const LoopInputs& inputs,
                    const std::vector<Vector>& embeddings, const Vector& theta_star);

// Per-step loss discrepancy sup_theta ||grad L_t(theta) - grad (psi_t' H psi_t)(theta)||
// over the ball, approximated on its boundary (exact for affine decoders since
// the gradient gap is affine in theta). Boundary points: both ends for dim 1,
// 720 angles for dim 2, a 90 x 180 angular grid for dim 3, otherwise
// `samples` uniform directions.
struct LdProbe {
  std::vector<WindowSample> window;  // realized (w, d, known) for tau = t..T_end
  Vector tail;                       // sum_{tau > T_end} (F')^{tau-t} P w_tau
};

LdProbe ld_probe(const SystemModel& model, std::span<const Vector> w,
                 std::span<const Vector> embeddings, std::span<const Vector> known, Index t,
                 Index k);

double estimate_ld(const LossSpec& loss, const SystemModel& model, const AffineDecoder& decoder,
                   const HypothesisSet& set, const LdProbe& probe, Index samples = 10'000,
                   std::uint64_t seed = 0);

// Least-squares line y = intercept + slope x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

struct RobustnessPoint {
  Index t = 0;
  double c_norm = 0.0;     // ||C_t||_F
  double bias_gap = 0.0;   // ||b_t - mean(w_{0:t})||
  double mean_w = 0.0;     // first coordinate of mean(w_{0:t}), for reporting
};

// Checkpoints t = 2^j - 1 plus the final step; theta_t read from the trace.
std::vector<RobustnessPoint> robustness_diagnostics(const RunTrace& trace,
                                                    const AffineDecoder& decoder);

// Smallest singular value of sum_{i<k} (F')^i P.
double weighted_sum_min_singular(const SystemModel& model, Index k);

}  // namespace ctxmpc
