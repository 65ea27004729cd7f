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

#include "ctxmpc/tuner.hpp"

#include <cmath>

#include "ctxmpc/error.hpp"

namespace ctxmpc {

double learning_rate(Index t, double D, double G, Index k) {
  if (!(D > 0.0) || !(G > 0.0)) throw ConfigError("learning rate needs D > 0 and G > 0");
  if (k < 1 || t < 0) throw ConfigError("learning rate needs k >= 1 and t >= 0");
  return D / (G * std::sqrt(2.0 * static_cast<double>(2 * k - 1) * static_cast<double>(t + 1)));
}

LearningRateSchedule LearningRateSchedule::from_bounds(double D, double G, Index k) {
  learning_rate(0, D, G, k);  // validates
  LearningRateSchedule s;
  s.D_ = D;
  s.G_ = G;
  s.k_ = k;
  return s;
}

LearningRateSchedule LearningRateSchedule::explicit_rates(std::vector<double> rates) {
  if (rates.empty()) throw ConfigError("explicit learning-rate list is empty");
  for (double r : rates) {
    if (!(r >= 0.0)) throw ConfigError("learning rates must be nonnegative");
  }
  LearningRateSchedule s;
  s.rates_ = std::move(rates);
  return s;
}

double LearningRateSchedule::operator()(Index t) const {
  if (!rates_.empty()) {
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(t), rates_.size() - 1);
    return rates_[i];
  }
  return learning_rate(t, D_, G_, k_);
}

DelayedTuner::DelayedTuner(LossSpec loss, AffineDecoder decoder, HypothesisSet set,
                           LearningRateSchedule schedule, Index k, Vector theta0)
    : loss_(std::move(loss)),
      decoder_(std::move(decoder)),
      set_(std::move(set)),
      schedule_(std::move(schedule)),
      k_(k),
      theta_(std::move(theta0)) {
  if (k_ < 1) throw ConfigError("tuner needs k >= 1");
  if (theta_.size() != decoder_.dim() || set_.center().size() != decoder_.dim()) {
    throw DimensionError("tuner: theta / hypothesis set dimension mismatch");
  }
  theta_ = set_.project(theta_);
}

void DelayedTuner::record_prediction(Index t, std::vector<WindowEntry> entries) {
  if (last_recorded_ && t <= *last_recorded_) {
    throw Error("tuner: prediction for step " + std::to_string(t) + " already recorded");
  }
  if (entries.empty() || static_cast<Index>(entries.size()) > k_) {
    throw DimensionError("tuner: window must hold between 1 and k entries");
  }
  last_recorded_ = t;
  buffer_.push_back({t, std::move(entries), theta_});
  // Anything older than t - k + 1 can never be consumed.
  while (!buffer_.empty() && buffer_.front().step < t - k_ + 1) buffer_.pop_front();
}

std::optional<TunerUpdate> DelayedTuner::apply_update(Index t, std::span<const Vector> realized) {
  const Index source = t - k_ + 1;
  if (source < 0) return std::nullopt;
  while (!buffer_.empty() && buffer_.front().step < source) buffer_.pop_front();
  if (buffer_.empty() || buffer_.front().step != source) return std::nullopt;

  const Pending& entry = buffer_.front();
  const Index last = source + static_cast<Index>(entry.entries.size()) - 1;
  if (static_cast<Index>(realized.size()) <= last) {
    throw ImmatureWindowError("tuner: window from step " + std::to_string(source) +
                              " needs w up to step " + std::to_string(last));
  }
  std::vector<WindowSample> window;
  window.reserve(entry.entries.size());
  for (std::size_t i = 0; i < entry.entries.size(); ++i) {
    const auto& e = entry.entries[i];
    window.push_back({realized[static_cast<std::size_t>(source) + i], e.d, e.known});
  }
  const Vector grad = loss_gradient(loss_, decoder_, entry.theta, window);
  const double eta = schedule_(t);
  theta_ = set_.project(theta_ - eta * grad);
  buffer_.pop_front();
  return TunerUpdate{t, source, eta, grad.norm(), theta_};
}

}  // namespace ctxmpc
