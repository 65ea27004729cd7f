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

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "ctxmpc/closed_loop.hpp"
#include "ctxmpc/dynamics.hpp"
#include "ctxmpc/error.hpp"
#include "ctxmpc/experiment.hpp"

namespace ctxmpc {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
Vector vec1(double v) { return Vector::Constant(1, v); }

DelayedTuner scalar_bias_tuner(Index k, double radius = 10.0, LossSpec loss = LossSpec::mse()) {
  return DelayedTuner(loss, AffineDecoder::bias_only(1, 1), HypothesisSet(vec1(0), radius),
                      LearningRateSchedule::from_bounds(1.0, 1.0, k), k, vec1(0));
}

std::vector<WindowEntry> entries(Index count) {
  return std::vector<WindowEntry>(static_cast<std::size_t>(count), WindowEntry{vec1(0), vec1(0)});
}

TEST(LearningRate, Examples) {
  EXPECT_NEAR(learning_rate(0, 1, 1, 1), 0.707107, 1e-6);
  EXPECT_NEAR(learning_rate(0, 1, 2, 2), 0.204124, 1e-6);
  EXPECT_THROW(learning_rate(0, 0, 1, 1), ConfigError);
  EXPECT_THROW(learning_rate(0, 1, -1, 1), ConfigError);
  EXPECT_THROW(learning_rate(0, 1, 1, 0), ConfigError);
}

TEST(LearningRate, StrictlyDecreasing) {
  for (auto [D, G, k] : {std::tuple{1.0, 1.0, Index{1}}, {0.6, 44.0, Index{6}}, {1200.0, 5e3, Index{2}}}) {
    for (Index t = 0; t < 1000; ++t) EXPECT_LT(learning_rate(t + 1, D, G, k), learning_rate(t, D, G, k));
  }
}

TEST(LearningRateSchedule, ExplicitRatesHoldLastValue) {
  const auto s = LearningRateSchedule::explicit_rates({0.5, 0.25});
  EXPECT_EQ(s(0), 0.5);
  EXPECT_EQ(s(1), 0.25);
  EXPECT_EQ(s(100), 0.25);
  EXPECT_THROW(LearningRateSchedule::explicit_rates({}), ConfigError);
}

TEST(DelayedTuner, BufferFillsToKBeforeFirstUpdate) {
  const Index k = 4;
  auto tuner = scalar_bias_tuner(k);
  std::vector<Vector> realized;
  for (Index t = 0; t < 12; ++t) {
    tuner.record_prediction(t, entries(std::min<Index>(k, 12 - t)));
    EXPECT_EQ(tuner.pending(), static_cast<std::size_t>(std::min<Index>(t + 1, k)));
    realized.push_back(vec1(1.0));
    const auto upd = tuner.apply_update(t, realized);
    EXPECT_EQ(upd.has_value(), t >= k - 1) << t;
    if (upd) EXPECT_EQ(upd->source_step, t - k + 1);
  }
}

TEST(DelayedTuner, RejectsDoubleRecordAndOversizedWindow) {
  auto tuner = scalar_bias_tuner(2);
  tuner.record_prediction(0, entries(2));
  EXPECT_THROW(tuner.record_prediction(0, entries(2)), Error);
  EXPECT_THROW(tuner.record_prediction(1, entries(3)), DimensionError);
  EXPECT_THROW(tuner.record_prediction(1, {}), DimensionError);
}

TEST(DelayedTuner, ImmatureWindowThrows) {
  auto tuner = scalar_bias_tuner(3);
  for (Index t = 0; t < 3; ++t) tuner.record_prediction(t, entries(3));
  const std::vector<Vector> partial = {vec1(1), vec1(1)};
  EXPECT_THROW(tuner.apply_update(2, partial), ImmatureWindowError);
}

TEST(DelayedTuner, ZeroGradientKeepsTheta) {
  DelayedTuner tuner(LossSpec::mse(), AffineDecoder::bias_only(1, 1), HypothesisSet(vec1(0), 5.0),
                     LearningRateSchedule::from_bounds(1, 1, 1), 1, vec1(0.75));
  tuner.record_prediction(0, entries(1));
  const auto upd = tuner.apply_update(0, std::vector<Vector>{vec1(0.75)});
  ASSERT_TRUE(upd);
  EXPECT_EQ(upd->grad_norm, 0.0);
  EXPECT_EQ(tuner.theta()(0), 0.75);
}

TEST(DelayedTuner, OneStepHandComputation) {
  // MSE, k = 1, w = 1, b0 = 0: gradient -2(w - b0) = -2, so b1 = b0 + 2 eta0.
  auto tuner = scalar_bias_tuner(1);
  tuner.record_prediction(0, entries(1));
  const auto upd = tuner.apply_update(0, std::vector<Vector>{vec1(1.0)});
  ASSERT_TRUE(upd);
  const double eta0 = learning_rate(0, 1, 1, 1);
  EXPECT_DOUBLE_EQ(upd->eta, eta0);
  EXPECT_DOUBLE_EQ(tuner.theta()(0), 2.0 * eta0);
}

TEST(DelayedTuner, ProjectsOntoBoundary) {
  auto tuner = scalar_bias_tuner(1, 0.5);
  tuner.record_prediction(0, entries(1));
  tuner.apply_update(0, std::vector<Vector>{vec1(10.0)});
  EXPECT_DOUBLE_EQ(tuner.theta()(0), 0.5);
}

TEST(DelayedTuner, GradientUsesSnapshotTheta) {
  // k = 2: the update at t = 2 must use theta recorded at step 1, not the
  // theta after the update at t = 1.
  const LossSpec loss = LossSpec::mse();
  const AffineDecoder dec = AffineDecoder::bias_only(1, 1);
  DelayedTuner tuner(loss, dec, HypothesisSet(vec1(0), 100.0),
                     LearningRateSchedule::explicit_rates({1.0}), 2, vec1(0));
  const std::vector<Vector> w = {vec1(3), vec1(3), vec1(3), vec1(3)};
  tuner.record_prediction(0, entries(2));
  tuner.apply_update(0, std::span(w).first(1));
  tuner.record_prediction(1, entries(2));
  const Vector theta_at_1 = tuner.theta();
  tuner.apply_update(1, std::span(w).first(2));
  tuner.record_prediction(2, entries(2));
  const Vector before = tuner.theta();
  const auto upd = tuner.apply_update(2, std::span(w).first(4));
  ASSERT_TRUE(upd);
  const std::vector<WindowSample> window = {{w[1], vec1(0), vec1(0)}, {w[2], vec1(0), vec1(0)}};
  const Vector expected = before - loss_gradient(loss, dec, theta_at_1, window);
  EXPECT_DOUBLE_EQ(upd->theta(0), expected(0));
}

LoopInputs scalar_loop(Index T, Index k, std::uint64_t seed) {
  auto model = std::make_shared<const SystemModel>(
      SystemModel::create(scalar(1), scalar(1), scalar(1), scalar(1), 2.0));
  LoopInputs in;
  in.model = model;
  in.k = k;
  in.x0 = vec1(0);
  in.w = generate(IidStochastic{vec1(0.5), vec1(0.5), seed}, 1, T).w;
  in.contexts.resize(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) in.contexts[t].step = t;
  in.encoder = std::make_shared<MetadataEncoder>(std::vector<std::string>{"none"});
  in.decoder = AffineDecoder::bias_only(1, 1);
  in.theta0 = vec1(0);
  in.seed = seed;
  return in;
}

TuningSetup scalar_tuning(const LoopInputs& in) {
  return {LossSpec::special(*in.model, in.k), HypothesisSet(vec1(0), 2.0),
          LearningRateSchedule::from_bounds(4.0, 5.0, in.k)};
}

TEST(DelayedTuner, TraceTimestampsShowDelay) {
  const auto in = scalar_loop(200, 5, 1);
  const RunTrace tr = run_closed_loop(in, scalar_tuning(in));
  const HypothesisSet set(vec1(0), 2.0);
  for (const auto& s : tr.steps) {
    EXPECT_TRUE(set.contains(s.theta));
    if (s.t >= 4) {
      ASSERT_TRUE(s.update_source.has_value());
      EXPECT_EQ(*s.update_source, s.t - 4);
    } else {
      EXPECT_FALSE(s.update_source.has_value());
    }
  }
}

TEST(DelayedTuner, HorizonShorterThanKNeverUpdates) {
  const auto in = scalar_loop(3, 5, 2);
  const RunTrace tr = run_closed_loop(in, scalar_tuning(in));
  for (const auto& s : tr.steps) {
    EXPECT_FALSE(s.update_source.has_value());
    EXPECT_EQ(s.theta(0), 0.0);
  }
}

TEST(DelayedTuner, MedianDistanceToMeanShrinks) {
  // k = 1, Special loss on i.i.d. w: theta* is the mean of w (0.5).
  const std::vector<Index> checkpoints = {63, 255, 1023, 4095};
  std::vector<std::vector<double>> dist(checkpoints.size());
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const auto in = scalar_loop(4096, 1, seed);
    const RunTrace tr = run_closed_loop(in, scalar_tuning(in));
    for (std::size_t c = 0; c < checkpoints.size(); ++c)
      dist[c].push_back(std::abs(tr.steps[checkpoints[c]].theta(0) - 0.5));
  }
  double prev = INFINITY;
  for (auto& d : dist) {
    std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
    EXPECT_LE(d[d.size() / 2], prev);
    prev = d[d.size() / 2];
  }
}

}  // namespace
}  // namespace ctxmpc
