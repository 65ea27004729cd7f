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

#include "ctxmpc/types.hpp"

namespace ctxmpc {

struct DareOptions {
  double tol = 1e-10;
  int max_iter = 10'000;
  // Relaxation factor for the fixed-point sweep, in (0, 1]. Halved
  // automatically whenever an iterate stops being finite or the residual
  // blows up.
  double damping = 1.0;
};

// Right-hand side of the discrete algebraic Riccati equation,
//   Q + A'PA - A'PB (R + B'PB)^{-1} B'PA.
Matrix riccati_map(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                   const Matrix& P);

// Frobenius norm of P - riccati_map(P).
double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& P);

// Solves the DARE by damped fixed-point iteration, falling back to a backward
// Riccati recursion started from zero terminal cost. The result is symmetric
// with residual <= opts.tol. Throws ConfigError for malformed Q/R and
// NumericalError when neither route converges within opts.max_iter.
Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                  const DareOptions& opts = {});

struct Gains {
  Matrix K;  // (R + B'PB)^{-1} B'PA
  Matrix F;  // A - BK
  Matrix H;  // B (R + B'PB)^{-1} B'
};

Gains gain_matrices(const Matrix& A, const Matrix& B, const Matrix& P, const Matrix& R);

// Largest eigenvalue modulus.
double spectral_radius(const Matrix& M);

// Empirical Gelfand bound ||F^j||_2 <= constant * rho^j for j in [0, horizon],
// with rho = spectral_radius(F) + margin.
struct GelfandFit {
  double rho = 0.0;
  double constant = 0.0;
  int horizon = 0;
};

GelfandFit fit_gelfand(const Matrix& F, int horizon = 50, double margin = 0.01);

// The linear plant together with every LQR-derived matrix the controller
// and the analysis need. Immutable once created.
class SystemModel {
 public:
  // Validates Q (symmetric PSD), R (symmetric PD) and dimensions, solves the
  // DARE and rejects closed loops with spectral radius >= 1.
  static SystemModel create(Matrix A, Matrix B, Matrix Q, Matrix R, double W,
                            const DareOptions& opts = {});

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Matrix& Q() const { return Q_; }
  const Matrix& R() const { return R_; }
  const Matrix& P() const { return P_; }
  const Matrix& K() const { return K_; }
  const Matrix& F() const { return F_; }
  const Matrix& H() const { return H_; }
  double W() const { return W_; }
  Index n() const { return A_.rows(); }
  Index m() const { return B_.cols(); }

  double closed_loop_radius() const { return rho_; }
  double residual() const { return residual_; }

  // u = -(R + B'PB)^{-1} B' (P A x + s), the common form of every controller
  // in this library; s collects the disturbance feedforward.
  Vector feedback(const Vector& x, const Vector& s) const;

  // (F')^i P for i in [0, count).
  std::vector<Matrix> weighted_powers(Index count) const;

 private:
  SystemModel() = default;

  Matrix A_, B_, Q_, R_, P_, K_, F_, H_;
  Matrix input_map_;  // (R + B'PB)^{-1} B'
  Matrix PA_;
  double W_ = 0.0;
  double rho_ = 0.0;
  double residual_ = 0.0;
};

}  // namespace ctxmpc
