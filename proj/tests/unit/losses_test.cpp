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

#include "ctxmpc/losses.hpp"

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "ctxmpc/error.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace ctxmpc {
namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }
Vector vec1(double v) { return Vector::Constant(1, v); }

SystemModel golden() { return SystemModel::create(scalar(1), scalar(1), scalar(1), scalar(1), 10.0); }

struct LossInstance {
  SystemModel model;
  AffineDecoder decoder;
  std::vector<WindowSample> window;
  Vector theta;
};

LossInstance random_instance(std::uint64_t seed) {
  auto base = testing::random_mpc_instance(seed);
  CounterRng rng(seed, 22);
  const Index n = base.model.n();
  const Index p = static_cast<Index>(rng.uniform_int(1, 3));
  AffineDecoder dec = AffineDecoder::full(n, p);
  std::vector<WindowSample> window;
  for (Index i = 0; i < base.window.k; ++i) {
    window.push_back({testing::random_vector(rng, n, 2.0), testing::random_vector(rng, p),
                      testing::random_vector(rng, n, 0.5)});
  }
  return {base.model, dec, window, testing::random_vector(rng, dec.dim())};
}

double relative_gap(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1.0, a.norm());
}

TEST(LossValue, PerfectPredictionIsZero) {
  const SystemModel m = golden();
  const AffineDecoder dec = AffineDecoder::bias_only(1, 1);
  const std::vector<WindowSample> window = {{vec1(0.3), vec1(5), vec1(0.1)},
                                            {vec1(0.3), vec1(-2), vec1(0.1)}};
  const Vector theta = vec1(0.2);
  for (auto spec : {LossSpec::mse(), LossSpec::mae(), LossSpec::special(m, 2)}) {
    EXPECT_NEAR(loss_value(spec, dec, theta, window), 0.0, 1e-15);
    if (spec.kind() != LossKind::Mae) EXPECT_LT(loss_gradient(spec, dec, theta, window).norm(), 1e-14);
  }
}

TEST(LossValue, ScalarExamples) {
  const SystemModel m = golden();
  const AffineDecoder dec = AffineDecoder::bias_only(1, 1);
  const std::vector<WindowSample> window = {{vec1(1.0), vec1(0.0), Vector()}};
  // H P^2 = P^2 / (1 + P) = 1 because P^2 = P + 1.
  EXPECT_NEAR(loss_value(LossSpec::special(m, 1), dec, vec1(0), window), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(loss_value(LossSpec::mse(), dec, vec1(0), window), 1.0);
  EXPECT_DOUBLE_EQ(loss_gradient(LossSpec::mse(), dec, vec1(0), window)(0), -2.0);
}

TEST(LossValue, NormalizerVariants) {
  const AffineDecoder dec = AffineDecoder::bias_only(1, 1);
  const std::vector<WindowSample> window(3, WindowSample{vec1(1.0), vec1(0.0), Vector()});
  EXPECT_DOUBLE_EQ(loss_value(LossSpec::mse(WindowNormalizer::Verbatim), dec, vec1(0), window), 1.5);
  EXPECT_DOUBLE_EQ(loss_value(LossSpec::mse(WindowNormalizer::TermCount), dec, vec1(0), window), 1.0);
  EXPECT_DOUBLE_EQ(loss_value(LossSpec::mae(WindowNormalizer::Verbatim), dec, vec1(3), window), 3.0);
}

TEST(LossValue, RejectsBadWindows) {
  const SystemModel m = golden();
  const AffineDecoder dec = AffineDecoder::bias_only(1, 1);
  const std::vector<WindowSample> immature = {{Vector(), vec1(0), Vector()}};
  EXPECT_THROW(loss_value(LossSpec::mse(), dec, vec1(0), immature), ImmatureWindowError);
  EXPECT_THROW(loss_value(LossSpec::mse(), dec, vec1(0), {}), DimensionError);
  const std::vector<WindowSample> two(2, WindowSample{vec1(1), vec1(0), Vector()});
  EXPECT_THROW(loss_value(LossSpec::special(m, 1), dec, vec1(0), two), DimensionError);
}

TEST(LossGradient, MaeSubgradientAtZeroResidual) {
  const AffineDecoder dec = AffineDecoder::bias_only(1, 1);
  const std::vector<WindowSample> window = {{vec1(0.5), vec1(0), Vector()}};
  EXPECT_EQ(loss_gradient(LossSpec::mae(), dec, vec1(0.5), window)(0), 0.0);
}

TEST(LossGradient, MatchesCentralDifferences) {
  for (auto kind : {LossKind::Mse, LossKind::Mae, LossKind::Special}) {
    int checked = 0;
    for (std::uint64_t seed = 0; checked < 100; ++seed) {
      const auto inst = random_instance(seed);
      const LossSpec spec = LossSpec::make(kind, inst.model, static_cast<Index>(inst.window.size()));
      if (kind == LossKind::Mae) {
        bool near_kink = false;
        for (const auto& s : inst.window)
          near_kink |= (residual(inst.decoder, inst.theta, s).array().abs() <= 1e-3).any();
        if (near_kink) continue;
      }
      const auto f = [&](const Vector& th) { return loss_value(spec, inst.decoder, th, inst.window); };
      const Vector fd = oracle::central_gradient(f, inst.theta, 1e-5);
      const Vector g = loss_gradient(spec, inst.decoder, inst.theta, inst.window);
      EXPECT_LE(relative_gap(g, fd), 1e-5) << loss_kind_name(kind) << " seed " << seed;
      ++checked;
    }
  }
}

TEST(LossValue, MidpointConvexity) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto inst = random_instance(seed);
    CounterRng rng(seed, 23);
    const Vector a = testing::random_vector(rng, inst.decoder.dim(), 3.0);
    const Vector b = testing::random_vector(rng, inst.decoder.dim(), 3.0);
    for (auto kind : {LossKind::Mse, LossKind::Mae, LossKind::Special}) {
      const LossSpec spec = LossSpec::make(kind, inst.model, static_cast<Index>(inst.window.size()));
      const double mid = loss_value(spec, inst.decoder, 0.5 * (a + b), inst.window);
      const double avg = 0.5 * (loss_value(spec, inst.decoder, a, inst.window) +
                                loss_value(spec, inst.decoder, b, inst.window));
      EXPECT_GE(mid, 0.0);
      EXPECT_LE(mid, avg * (1.0 + 1e-12) + 1e-12);
    }
  }
}

TEST(SpecialLoss, FullWindowEqualsExcessCost) {
  // Window reaching T - 1 leaves no tail, so psi_hat = psi.
  const auto inst = random_instance(5);
  const SystemModel& m = inst.model;
  const Index L = static_cast<Index>(inst.window.size());
  Vector psi = Vector::Zero(m.n());
  Matrix Ftp = m.P();
  for (Index i = 0; i < L; ++i) {
    const auto& s = inst.window[i];
    psi += Ftp * (s.w - s.known - decode(inst.decoder.params(inst.theta), s.d));
    Ftp = m.F().transpose() * Ftp;
  }
  const double direct = psi.dot(m.H() * psi);
  EXPECT_NEAR(loss_value(LossSpec::special(m, L), inst.decoder, inst.theta, inst.window), direct,
              1e-10 * (1.0 + direct));
}

WindowSampler scalar_sampler(double radius) {
  return [radius](CounterRng& rng) {
    std::pair<Vector, std::vector<WindowSample>> out;
    out.first = vec1(rng.uniform(-radius, radius));
    for (int i = 0; i < 3; ++i) out.second.push_back({vec1(rng.uniform(0.0, 1.0)), vec1(0), Vector()});
    return out;
  };
}

TEST(GradientBound, ZeroResidualFallsBackToFloor) {
  const AffineDecoder dec = AffineDecoder::bias_only(1, 1);
  const WindowSampler zero = [](CounterRng&) {
    return std::pair<Vector, std::vector<WindowSample>>{vec1(0), {{vec1(0), vec1(0), Vector()}}};
  };
  const auto g = gradient_bound_estimate(LossSpec::mse(), dec, zero, 100, 1, 1.5, 0.25);
  EXPECT_TRUE(g.floored);
  EXPECT_EQ(g.max_norm, 0.0);
  EXPECT_EQ(g.value, 0.25);
}

TEST(GradientBound, StableAcrossSeedsAndMonotoneInRadius) {
  const SystemModel m = golden();
  const AffineDecoder dec = AffineDecoder::bias_only(1, 1);
  const LossSpec spec = LossSpec::special(m, 3);
  const double g1 = gradient_bound_estimate(spec, dec, scalar_sampler(1.0), 10'000, 1).value;
  const double g2 = gradient_bound_estimate(spec, dec, scalar_sampler(1.0), 10'000, 2).value;
  EXPECT_NEAR(g1 / g2, 1.0, 0.05);
  double prev = 0.0;
  for (double r : {0.5, 1.0, 2.0, 4.0}) {
    const double g = gradient_bound_estimate(spec, dec, scalar_sampler(r), 10'000, 1).value;
    EXPECT_GE(g, prev);
    prev = g;
  }
}

}  // namespace
}  // namespace ctxmpc
