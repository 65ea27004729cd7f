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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ctxmpc/cdp.hpp"
#include "ctxmpc/losses.hpp"
#include "ctxmpc/lqr.hpp"
#include "ctxmpc/trace.hpp"
#include "ctxmpc/tuner.hpp"

namespace ctxmpc {

// Everything one closed-loop run needs besides the tuning rule.
struct LoopInputs {
  std::shared_ptr<const SystemModel> model;
  Index k = 1;
  Vector x0;
  std::vector<Vector> w;             // realized disturbances, T entries
  std::vector<StepContext> contexts;  // one per step; `known` may be empty (= 0)
  std::shared_ptr<const Encoder> encoder;
  AffineDecoder decoder = AffineDecoder::bias_only(1, 0);
  Vector theta0;
  bool clip = true;  // pull predictions back into the W-ball
  std::uint64_t seed = 0;
  std::string config_digest;

  Index horizon() const { return static_cast<Index>(w.size()); }
};

struct TuningSetup {
  LossSpec loss;
  HypothesisSet set;
  LearningRateSchedule schedule;
};

// Embeds every step once. The encoder is pure, so the embedding of step tau
// does not depend on the step at which it is requested.
std::vector<Vector> embed_all(const Encoder& encoder, std::span<const StepContext> contexts);

// Runs: predict -> MPC (closed form) -> step -> reveal w_t -> tuner update.
// Without `tuning` theta stays at theta0 throughout (frozen replay and the
// untuned baselines).
RunTrace run_closed_loop(const LoopInputs& inputs, const std::optional<TuningSetup>& tuning);

// Same, reusing precomputed embeddings (embed_all). Used by analysis replays.
RunTrace run_closed_loop(const LoopInputs& inputs, const std::vector<Vector>& embeddings,
                         const std::optional<TuningSetup>& tuning);

// The known part of w_tau, zero when the context leaves it unset.
Vector known_term(const LoopInputs& inputs, Index tau);

}  // namespace ctxmpc
