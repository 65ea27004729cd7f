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

#include "ctxmpc/error.hpp"

namespace ctxmpc {

Index horizon_end(Index t, Index k, Index T) { return std::min(t + k - 1, T - 1); }

Vector clip_to_ball(const Vector& w, double radius, bool* clipped) {
  const double norm = w.norm();
  const bool outside = norm > radius;
  if (clipped) *clipped = outside;
  if (!outside) return w;
  return w * (radius / norm);
}

MpcController::MpcController(SystemModel model, Index k)
    : model_(std::move(model)), k_(k) {
  if (k_ < 1) throw ConfigError("prediction horizon k must be >= 1");
  weights_ = model_.weighted_powers(k_);
}

Vector MpcController::feedforward(const std::vector<Vector>& predictions) const {
  if (static_cast<Index>(predictions.size()) > k_) {
    throw DimensionError("prediction window longer than k");
  }
  Vector s = Vector::Zero(model_.n());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].size() != model_.n()) throw DimensionError("prediction has wrong dimension");
    s.noalias() += weights_[i] * predictions[i];
  }
  return s;
}

Vector MpcController::action(const Vector& x, const PredictionWindow& window) const {
  return model_.feedback(x, feedforward(window.predictions));
}

Vector mpc_action_explicit(const SystemModel& model, const Vector& x,
                           const PredictionWindow& window) {
  const Index len = std::max<Index>(1, static_cast<Index>(window.predictions.size()));
  return MpcController(model, len).action(x, window);
}

std::vector<Vector> mpc_action_batch(const SystemModel& model, const Vector& x,
                                     const PredictionWindow& window) {
  const Index n = model.n();
  const Index m = model.m();
  const Index N = static_cast<Index>(window.predictions.size());
  if (N < 1) throw DimensionError("prediction window is empty");
  if (x.size() != n) throw DimensionError("state has wrong dimension");

  // Stacked states X = (x_t, ..., x_{t+N}) = Phi x + Gamma U + Psi What.
  const Index rows = (N + 1) * n;
  Matrix Phi = Matrix::Zero(rows, n);
  Matrix Gamma = Matrix::Zero(rows, N * m);
  Matrix Psi = Matrix::Zero(rows, N * n);
  Matrix Apow = Matrix::Identity(n, n);
  std::vector<Matrix> powers;  // A^0 .. A^N
  powers.reserve(static_cast<std::size_t>(N + 1));
  for (Index j = 0; j <= N; ++j) {
    powers.push_back(Apow);
    Apow = model.A() * Apow;
  }
  for (Index j = 0; j <= N; ++j) {
    Phi.block(j * n, 0, n, n) = powers[static_cast<std::size_t>(j)];
    for (Index i = 0; i < j; ++i) {
      const Matrix& Ap = powers[static_cast<std::size_t>(j - 1 - i)];
      Gamma.block(j * n, i * m, n, m) = Ap * model.B();
      Psi.block(j * n, i * n, n, n) = Ap;
    }
  }
  Vector what(N * n);
  for (Index i = 0; i < N; ++i) {
    if (window.predictions[static_cast<std::size_t>(i)].size() != n) {
      throw DimensionError("prediction has wrong dimension");
    }
    what.segment(i * n, n) = window.predictions[static_cast<std::size_t>(i)];
  }

  // Block-diagonal weights: Q on stages 0..N-1, P on the terminal state.
  Matrix Wx = Matrix::Zero(rows, rows);
  for (Index j = 0; j < N; ++j) Wx.block(j * n, j * n, n, n) = model.Q();
  Wx.block(N * n, N * n, n, n) = model.P();
  Matrix Wu = Matrix::Zero(N * m, N * m);
  for (Index j = 0; j < N; ++j) Wu.block(j * m, j * m, m, m) = model.R();

  const Vector free = Phi * x + Psi * what;
  const Matrix hessian = Gamma.transpose() * Wx * Gamma + Wu;
  const Vector linear = Gamma.transpose() * (Wx * free);
  Eigen::LLT<Matrix> llt(0.5 * (hessian + hessian.transpose()));
  if (llt.info() != Eigen::Success) throw NumericalError("batch MPC: KKT system is singular");
  const Vector U = llt.solve(-linear);

  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(N));
  for (Index j = 0; j < N; ++j) out.push_back(U.segment(j * m, m));
  return out;
}

}  // namespace ctxmpc
