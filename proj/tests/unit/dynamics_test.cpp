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

#include "ctxmpc/dynamics.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "ctxmpc/error.hpp"
#include "ctxmpc/rng.hpp"
#include "ctxmpc/scenarios.hpp"
#include "ctxmpc/trace.hpp"
#include "oracles.hpp"

namespace ctxmpc {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
Vector vec1(double v) { return Vector::Constant(1, v); }

SystemModel golden() { return SystemModel::create(scalar(1), scalar(1), scalar(1), scalar(1), 10.0); }

RunTrace make_trace(const SystemModel& m, const Vector& x0, const std::vector<Vector>& u,
                    const std::vector<Vector>& w) {
  RunTrace tr;
  Vector x = x0;
  for (std::size_t t = 0; t < u.size(); ++t) {
    StepRecord r;
    r.t = static_cast<Index>(t);
    r.x = x;
    r.u = u[t];
    r.w = w[t];
    r.stage_cost = stage_cost(m, x, u[t]);
    tr.steps.push_back(r);
    x = step(m, x, u[t], w[t]);
  }
  tr.terminal_state = x;
  tr.terminal_cost = terminal_cost(m, x);
  return tr;
}

TEST(Step, Examples) {
  const SystemModel m = golden();
  EXPECT_EQ(step(m, vec1(0), vec1(0), vec1(0))(0), 0.0);
  EXPECT_DOUBLE_EQ(step(m, vec1(1), vec1(-1), vec1(0.5))(0), 0.5);
  const SystemModel drone = drone_model(1.0);
  const Vector e1 = Vector::Unit(4, 0);
  EXPECT_EQ(step(drone, e1, Vector::Zero(2), Vector::Zero(4)), drone.A().col(0));
  EXPECT_THROW(step(drone, e1, Vector::Zero(3), Vector::Zero(4)), DimensionError);
}

TEST(TotalCost, Examples) {
  const SystemModel m = golden();
  const std::vector<Vector> zeros(4, vec1(0));
  EXPECT_EQ(total_cost(make_trace(m, vec1(0), zeros, zeros), m), 0.0);
  EXPECT_NEAR(total_cost(make_trace(m, vec1(1), {vec1(0)}, {vec1(0)}), m), 2.618034, 1e-6);
}

TEST(TotalCost, MatchesNaiveSummation) {
  const SystemModel m = golden();
  CounterRng rng(11);
  std::vector<Vector> u, w;
  for (int t = 0; t < 20; ++t) {
    u.push_back(vec1(rng.uniform(-1, 1)));
    w.push_back(vec1(rng.uniform(-1, 1)));
  }
  const RunTrace tr = make_trace(m, vec1(0.3), u, w);
  double x = 0.3, naive = 0.0;
  const double P = m.P()(0, 0);
  for (int t = 0; t < 20; ++t) {
    naive += x * x + u[t](0) * u[t](0);
    x = x + u[t](0) + w[t](0);
  }
  naive += P * x * x;
  EXPECT_NEAR(total_cost(tr, m), naive, 1e-12);
  EXPECT_NEAR(tr.recorded_cost(), naive, 1e-12);
}

TEST(TotalCost, RejectsIncompleteTrace) {
  const SystemModel m = golden();
  RunTrace tr = make_trace(m, vec1(1), {vec1(0), vec1(0)}, {vec1(0), vec1(0)});
  tr.terminal_state = Vector();
  EXPECT_THROW(total_cost(tr, m), TraceError);
}

TEST(OptimalCost, ZeroDisturbance) {
  const SystemModel m = drone_model(1.0);
  const std::vector<Vector> w(30, Vector::Zero(4));
  EXPECT_EQ(optimal_cost(m, Vector::Zero(4), w), 0.0);

  const Vector x0 = (Vector(4) << 3.0, -1.0, 0.5, 2.0).finished();
  Vector x = x0;
  double lqr = 0.0;
  for (int t = 0; t < 30; ++t) {
    const Vector u = -m.K() * x;
    lqr += x.dot(m.Q() * x) + u.dot(m.R() * u);
    x = m.A() * x + m.B() * u;
  }
  lqr += x.dot(m.P() * x);
  EXPECT_NEAR(optimal_cost(m, x0, w), lqr, 1e-9 * lqr);
}

TEST(OptimalCost, MatchesDenseQp) {
  const SystemModel m = golden();
  CounterRng rng(5);
  std::vector<Vector> w;
  for (int t = 0; t < 5; ++t) w.push_back(vec1(rng.uniform(-1, 1)));
  const auto qp = oracle::dense_qp(m.A(), m.B(), m.Q(), m.R(), m.P(), vec1(0.7), w);
  const Rollout r = optimal_rollout(m, vec1(0.7), w);
  EXPECT_NEAR(r.cost, qp.cost, 1e-8);
  for (int t = 0; t < 5; ++t) EXPECT_NEAR(r.inputs[t](0), qp.u[t](0), 1e-8);
  EXPECT_EQ(r.states.size(), 6u);
}

TEST(DisturbanceFeedforward, MatchesDirectSum) {
  const SystemModel m = drone_model(1.0);
  CounterRng rng(2);
  std::vector<Vector> w;
  for (int t = 0; t < 12; ++t) {
    Vector v(4);
    for (int i = 0; i < 4; ++i) v(i) = rng.uniform(-1, 1);
    w.push_back(v);
  }
  const auto s = disturbance_feedforward(m, w);
  ASSERT_EQ(s.size(), 13u);
  EXPECT_TRUE(s[12].isZero(0.0));
  for (int t = 0; t < 12; ++t) {
    Vector direct = Vector::Zero(4);
    Matrix Ft = Matrix::Identity(4, 4);
    for (int tau = t; tau < 12; ++tau) {
      direct += Ft * m.P() * w[tau];
      Ft = m.F().transpose() * Ft;
    }
    EXPECT_LT((s[t] - direct).norm(), 1e-10 * (1.0 + direct.norm()));
  }
}

TEST(Generate, IidIsDeterministicAndBounded) {
  IidStochastic src{Vector::Constant(2, 0.5), Vector::Constant(2, 0.25), 9};
  const auto a = generate(src, 2, 500);
  const auto b = generate(src, 2, 500);
  ASSERT_EQ(a.w.size(), 500u);
  for (int t = 0; t < 500; ++t) {
    EXPECT_EQ(a.w[t], b.w[t]);
    EXPECT_TRUE(((a.w[t].array() - 0.5).abs() <= 0.25).all());
    EXPECT_TRUE(a.known[t].isZero(0.0));
  }
  src.seed = 10;
  EXPECT_NE(generate(src, 2, 500).w[0], a.w[0]);
}

TEST(Generate, WindCompositeRespectsBound) {
  UniformWindComposite src;
  src.reference = sample_closed_path({{0, 0}, {50, 0}, {50, 30}, {0, 30}}, 4.0, 201);
  src.seed = 3;
  const auto r = generate(src, 4, 200);
  const double W = wind_composite_bound(4.0, src.half_range, src.gain);
  ASSERT_EQ(r.wind.size(), 200u);
  for (int t = 0; t < 200; ++t) {
    EXPECT_LE(r.w[t].norm(), W);
    EXPECT_TRUE((r.wind[t].array().abs() <= 20.0).all());
    // Velocity rows carry -gain * wind, position rows the reference motion.
    EXPECT_NEAR(r.w[t](2), r.known[t](2) - 0.2 * r.wind[t](0), 1e-12);
    EXPECT_NEAR(r.w[t](3), r.known[t](3) - 0.2 * r.wind[t](1), 1e-12);
    EXPECT_EQ(r.w[t].head(2), r.known[t].head(2));
  }
}

}  // namespace
}  // namespace ctxmpc
