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

#include "ctxmpc/closed_loop.hpp"

#include "ctxmpc/dynamics.hpp"
#include "ctxmpc/error.hpp"
#include "ctxmpc/mpc.hpp"

namespace ctxmpc {

std::vector<Vector> embed_all(const Encoder& encoder, std::span<const StepContext> contexts) {
  std::vector<Vector> out;
  out.reserve(contexts.size());
  for (const auto& c : contexts) out.push_back(embed_or_zero(encoder, c).values);
  return out;
}

Vector known_term(const LoopInputs& inputs, Index tau) {
  const auto& c = inputs.contexts[static_cast<std::size_t>(tau)];
  if (c.known.size() == 0) return Vector::Zero(inputs.model->n());
  return c.known;
}

namespace {

void validate(const LoopInputs& in) {
  if (!in.model) throw ConfigError("closed loop: missing model");
  if (!in.encoder) throw ConfigError("closed loop: missing encoder");
  if (in.k < 1) throw ConfigError("closed loop: k must be >= 1");
  const Index n = in.model->n();
  if (in.x0.size() != n) throw DimensionError("closed loop: x0 has wrong size");
  if (in.contexts.size() != in.w.size()) {
    throw DimensionError("closed loop: need one context per disturbance");
  }
  for (const auto& w : in.w) {
    if (w.size() != n) throw DimensionError("closed loop: disturbance has wrong size");
  }
  if (in.decoder.n() != n || in.decoder.p() != in.encoder->dim()) {
    throw DimensionError("closed loop: decoder does not match model/encoder");
  }
  if (in.theta0.size() != in.decoder.dim()) throw DimensionError("closed loop: theta0 has wrong size");
}

}  // namespace

RunTrace run_closed_loop(const LoopInputs& inputs, const std::optional<TuningSetup>& tuning) {
  validate(inputs);
  return run_closed_loop(inputs, embed_all(*inputs.encoder, inputs.contexts), tuning);
}

RunTrace run_closed_loop(const LoopInputs& inputs, const std::vector<Vector>& embeddings,
                         const std::optional<TuningSetup>& tuning) {
  validate(inputs);
  const SystemModel& model = *inputs.model;
  const Index T = inputs.horizon();
  if (static_cast<Index>(embeddings.size()) != T) {
    throw DimensionError("closed loop: need one embedding per step");
  }
  const MpcController controller(model, inputs.k);

  std::optional<DelayedTuner> tuner;
  if (tuning) {
    tuner.emplace(tuning->loss, inputs.decoder, tuning->set, tuning->schedule, inputs.k,
                  inputs.theta0);
  }

  RunTrace trace;
  trace.seed = inputs.seed;
  trace.config_digest = inputs.config_digest;
  trace.k = inputs.k;
  trace.steps.reserve(static_cast<std::size_t>(T));

  Vector x = inputs.x0;
  Vector theta = tuner ? tuner->theta() : inputs.theta0;
  for (Index t = 0; t < T; ++t) {
    const Index last = horizon_end(t, inputs.k, T);
    PredictionWindow window{t, inputs.k, {}, 0};
    std::vector<WindowEntry> entries;
    for (Index tau = t; tau <= last; ++tau) {
      const Vector& d = embeddings[static_cast<std::size_t>(tau)];
      Vector known = known_term(inputs, tau);
      Vector pred = known + inputs.decoder(theta, d);
      if (inputs.clip) {
        bool moved = false;
        pred = clip_to_ball(pred, model.W(), &moved);
        if (moved) ++window.clipped;
      }
      window.predictions.push_back(std::move(pred));
      entries.push_back({d, std::move(known)});
    }
    const Vector u = controller.action(x, window);
    const Vector& w = inputs.w[static_cast<std::size_t>(t)];

    StepRecord rec;
    rec.t = t;
    rec.x = x;
    rec.u = u;
    rec.w = w;
    rec.theta = theta;
    rec.stage_cost = stage_cost(model, x, u);
    trace.clip_count += window.clipped;
    rec.predictions = std::move(window.predictions);

    if (tuner) {
      tuner->record_prediction(t, std::move(entries));
      const std::span<const Vector> realized(inputs.w.data(), static_cast<std::size_t>(t) + 1);
      if (auto upd = tuner->apply_update(t, realized)) {
        rec.update_source = upd->source_step;
        rec.eta = upd->eta;
        rec.grad_norm = upd->grad_norm;
      }
      theta = tuner->theta();
    }
    trace.steps.push_back(std::move(rec));
    x = step(model, x, u, w);
  }
  trace.terminal_state = x;
  trace.terminal_cost = terminal_cost(model, x);
  return trace;
}

}  // namespace ctxmpc
