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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxmpc/lqr.hpp"
#include "ctxmpc/types.hpp"

namespace ctxmpc {

struct StepRecord {
  Index t = 0;
  Vector x;
  Vector u;
  Vector w;
  std::vector<Vector> predictions;  // what_{tau|t}, tau = t..horizon_end, as applied
  Vector theta;                     // theta_t used for the predictions
  double stage_cost = 0.0;
  // Tuner update performed at the end of this step, if any.
  std::optional<Index> update_source;  // t - k + 1
  double eta = 0.0;
  double grad_norm = 0.0;
};

struct RunTrace {
  std::vector<StepRecord> steps;
  Vector terminal_state;
  double terminal_cost = 0.0;
  std::uint64_t seed = 0;
  std::string config_digest;
  Index k = 0;
  std::size_t clip_count = 0;

  Index horizon() const { return static_cast<Index>(steps.size()); }
  // Sum of recorded stage costs plus terminal cost.
  double recorded_cost() const;
  Vector final_theta() const;
};

// Recomputes the cost from the recorded states and inputs. Throws TraceError
// if the trace is incomplete (missing terminal state, inconsistent sizes).
double total_cost(const RunTrace& trace, const SystemModel& model);

// CSV layout, one row per step plus a terminal row:
//   t, x_0..x_{n-1}, u_0..u_{m-1}, w_0..w_{n-1},
//   what_<j>_<i> for window slot j < k and coordinate i < n (empty past the
//   window end), theta_0..theta_{q-1}, stage_cost, update_source, eta,
//   grad_norm
// The terminal row has t = T, the terminal state, and the terminal cost in the
// stage_cost column; all other fields are empty. A leading comment line
// "# ctxmpc-trace v1 seed=<seed> digest=<digest> k=<k>" carries run identity.
// Doubles are written in shortest round-trip form.
void write_trace_csv(std::ostream& out, const RunTrace& trace);
RunTrace read_trace_csv(std::istream& in);

nlohmann::json trace_summary(const RunTrace& trace, const SystemModel& model);

// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

}  // namespace ctxmpc
