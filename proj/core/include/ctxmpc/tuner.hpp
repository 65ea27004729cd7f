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

#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "ctxmpc/cdp.hpp"
#include "ctxmpc/losses.hpp"

namespace ctxmpc {

// eta_t = D / (G sqrt(2 (2k - 1) (t + 1))).
double learning_rate(Index t, double D, double G, Index k);

class LearningRateSchedule {
 public:
  static LearningRateSchedule from_bounds(double D, double G, Index k);
  // eta_t = rates[min(t, size - 1)].
  static LearningRateSchedule explicit_rates(std::vector<double> rates);

  double operator()(Index t) const;

  double D() const { return D_; }
  double G() const { return G_; }

 private:
  double D_ = 0.0;
  double G_ = 0.0;
  Index k_ = 1;
  std::vector<double> rates_;
};

struct TunerUpdate {
  Index step = 0;         // t
  Index source_step = 0;  // t - k + 1, whose window the gradient came from
  double eta = 0.0;
  double grad_norm = 0.0;
  Vector theta;           // theta_{t+1}
};

// Online update theta_{t+1} = Proj(theta_t - eta_t grad L_{t-k+1}(theta_{t-k+1})).
//
// Each control step records its prediction window together with a copy of the
// theta that produced it. The gradient for the window started at s is
// evaluated at that stored copy once w_s .. w_{T_end(s)} are known, which is
// at the end of step s + k - 1. Steps t < k - 1 perform no update. Single-writer:
// the loop owning the tuner is the only mutator.
class DelayedTuner {
 public:
  DelayedTuner(LossSpec loss, AffineDecoder decoder, HypothesisSet set,
               LearningRateSchedule schedule, Index k, Vector theta0);

  const Vector& theta() const { return theta_; }
  Index k() const { return k_; }
  std::size_t pending() const { return buffer_.size(); }

  // Records the window predicted at step t with the current theta. Steps must
  // be recorded in increasing order, once each.
  void record_prediction(Index t, std::vector<WindowEntry> entries);

  // Called at the end of step t with every disturbance realized so far
  // (realized.size() >= t + 1). Consumes the window recorded at t - k + 1, if
  // any. Throws ImmatureWindowError when that window's disturbances are not
  // all in `realized`.
  std::optional<TunerUpdate> apply_update(Index t, std::span<const Vector> realized);

 private:
  struct Pending {
    Index step;
    std::vector<WindowEntry> entries;
    Vector theta;
  };

  LossSpec loss_;
  AffineDecoder decoder_;
  HypothesisSet set_;
  LearningRateSchedule schedule_;
  Index k_;
  Vector theta_;
  std::deque<Pending> buffer_;
  std::optional<Index> last_recorded_;
};

}  // namespace ctxmpc
