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

#include "ctxmpc/mpc.hpp"

#include <algorithm>

#include <gtest/gtest.h>

#include "ctxmpc/error.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace ctxmpc {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
Vector vec1(double v) { return Vector::Constant(1, v); }

PredictionWindow window_of(std::vector<Vector> preds, Index t = 0) {
  PredictionWindow w;
  w.t = t;
  w.k = static_cast<Index>(preds.size());
  w.predictions = std::move(preds);
  return w;
}

TEST(HorizonEnd, ClampsToLastStep) {
  EXPECT_EQ(horizon_end(0, 5, 100), 4);
  EXPECT_EQ(horizon_end(97, 5, 100), 99);
  EXPECT_EQ(horizon_end(99, 1, 100), 99);
}

TEST(ClipToBall, ScalesRadially) {
  bool clipped = false;
  const Vector v = clip_to_ball(Eigen::Vector2d(3, 4), 1.0, &clipped);
  EXPECT_TRUE(clipped);
  EXPECT_NEAR(v(0), 0.6, 1e-15);
  EXPECT_NEAR(v(1), 0.8, 1e-15);
  EXPECT_EQ(clip_to_ball(Eigen::Vector2d(0.3, 0.4), 1.0, &clipped), Eigen::Vector2d(0.3, 0.4));
  EXPECT_FALSE(clipped);
}

TEST(MpcExplicit, ZeroPredictionIsLqr) {
  auto inst = testing::random_mpc_instance(3);
  for (auto& p : inst.window.predictions) p.setZero();
  const Vector u = mpc_action_explicit(inst.model, inst.x, inst.window);
  EXPECT_LT((u + inst.model.K() * inst.x).norm(), 1e-12 * (1.0 + u.norm()));
}

TEST(MpcExplicit, GoldenRatioExample) {
  const SystemModel m = SystemModel::create(scalar(1), scalar(1), scalar(1), scalar(1), 1.0);
  const Vector u = mpc_action_explicit(m, vec1(1.0), window_of({vec1(0.5)}));
  EXPECT_NEAR(u(0), -0.927051, 1e-6);
  const auto qp = oracle::dense_qp(m.A(), m.B(), m.Q(), m.R(), m.P(), vec1(1.0), {vec1(0.5)});
  EXPECT_NEAR(u(0), qp.u[0](0), 1e-12);
}

TEST(MpcExplicit, MatchesDenseQpOracle) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    auto inst = testing::random_mpc_instance(seed);
    const auto& m = inst.model;
    const auto qp = oracle::dense_qp(m.A(), m.B(), m.Q(), m.R(), m.P(), inst.x,
                                     inst.window.predictions);
    const Vector u = mpc_action_explicit(m, inst.x, inst.window);
    EXPECT_LT((u - qp.u[0]).cwiseAbs().maxCoeff(), 1e-8) << "seed " << seed;
  }
}

TEST(MpcBatch, ZeroAtOrigin) {
  auto inst = testing::random_mpc_instance(8);
  for (auto& p : inst.window.predictions) p.setZero();
  const auto us = mpc_action_batch(inst.model, Vector::Zero(inst.model.n()), inst.window);
  ASSERT_EQ(us.size(), inst.window.predictions.size());
  for (const auto& u : us) EXPECT_LT(u.norm(), 1e-12);
}

TEST(MpcBatch, AgreesWithExplicitOnRandomInstances) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto inst = testing::random_mpc_instance(seed);
    const Vector ue = mpc_action_explicit(inst.model, inst.x, inst.window);
    const Vector ub = mpc_action_batch(inst.model, inst.x, inst.window).front();
    worst = std::max(worst, (ue - ub).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(MpcController, LinearInStateAndPredictions) {
  auto a = testing::random_mpc_instance(40);
  CounterRng rng(40, 3);
  const MpcController ctrl(a.model, a.window.k);
  PredictionWindow b = a.window;
  for (auto& p : b.predictions) p = testing::random_vector(rng, a.model.n());
  const Vector y = testing::random_vector(rng, a.model.n());
  PredictionWindow sum = a.window;
  for (std::size_t i = 0; i < sum.predictions.size(); ++i)
    sum.predictions[i] = 2.0 * a.window.predictions[i] - 3.0 * b.predictions[i];
  const Vector lhs = ctrl.action(2.0 * a.x - 3.0 * y, sum);
  const Vector rhs = 2.0 * ctrl.action(a.x, a.window) - 3.0 * ctrl.action(y, b);
  EXPECT_LT((lhs - rhs).norm(), 1e-10 * (1.0 + lhs.norm()));
}

TEST(MpcController, RejectsOversizedWindow) {
  auto inst = testing::random_mpc_instance(4);
  const MpcController ctrl(inst.model, 1);
  inst.window.predictions.resize(2, Vector::Zero(inst.model.n()));
  EXPECT_THROW(ctrl.action(inst.x, inst.window), DimensionError);
}

TEST(MpcController, PerfectFullHorizonPredictionIsOptimal) {
  // With the whole future known, receding-horizon MPC reproduces J*.
  const SystemModel m = SystemModel::create(scalar(1.1), scalar(1), scalar(1), scalar(0.5), 1.0);
  CounterRng rng(77);
  const Index T = 15;
  std::vector<Vector> w;
  for (Index t = 0; t < T; ++t) w.push_back(vec1(rng.uniform(-1, 1)));
  const MpcController ctrl(m, T);
  Vector x = vec1(0.4);
  double cost = 0.0;
  for (Index t = 0; t < T; ++t) {
    const Vector u = ctrl.action(x, window_of(std::vector<Vector>(w.begin() + t, w.end()), t));
    cost += x.dot(m.Q() * x) + u.dot(m.R() * u);
    x = m.A() * x + m.B() * u + w[t];
  }
  cost += x.dot(m.P() * x);
  const auto qp = oracle::dense_qp(m.A(), m.B(), m.Q(), m.R(), m.P(), vec1(0.4), w);
  EXPECT_NEAR(cost, qp.cost, 1e-9 * qp.cost);
}

}  // namespace
}  // namespace ctxmpc
