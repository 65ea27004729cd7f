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

#include "ctxmpc/lqr.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "ctxmpc/error.hpp"

namespace ctxmpc {

namespace {

void require_square(const Matrix& M, const char* name) {
  if (M.rows() != M.cols()) {
    std::ostringstream os;
    os << name << " must be square, got " << M.rows() << "x" << M.cols();
    throw DimensionError(os.str());
  }
}

void require_symmetric(const Matrix& M, const char* name) {
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ConfigError(std::string(name) + " is not symmetric");
  }
}

double min_eigenvalue(const Matrix& M) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void check_problem(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
  require_square(A, "A");
  require_square(Q, "Q");
  require_square(R, "R");
  if (B.rows() != A.rows() || Q.rows() != A.rows() || R.rows() != B.cols()) {
    throw DimensionError("inconsistent dimensions among A, B, Q, R");
  }
  require_symmetric(Q, "Q");
  require_symmetric(R, "R");
  const double qscale = std::max(1.0, Q.cwiseAbs().maxCoeff());
  if (min_eigenvalue(Q) < -1e-12 * qscale) throw ConfigError("Q is not positive semidefinite");
  if (min_eigenvalue(R) <= 0.0) throw ConfigError("R is not positive definite");
}

Matrix symmetrized(const Matrix& M) { return 0.5 * (M + M.transpose()); }

bool finite(const Matrix& M) { return M.allFinite(); }

// Keeps sweeping past the tolerance while the residual still shrinks, so P is
// accurate to rounding rather than just to `tol`.
Matrix polish(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, Matrix P) {
  double res = dare_residual(A, B, Q, R, P);
  for (int it = 0; it < 200 && res > 0.0; ++it) {
    Matrix next = symmetrized(riccati_map(A, B, Q, R, P));
    const double r = dare_residual(A, B, Q, R, next);
    if (!(r < res)) break;
    P = std::move(next);
    res = r;
  }
  return P;
}

}  // namespace

Matrix riccati_map(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                   const Matrix& P) {
  const Matrix PA = P * A;
  const Matrix BtPA = B.transpose() * PA;
  const Matrix S = R + B.transpose() * P * B;
  return Q + A.transpose() * PA - BtPA.transpose() * S.ldlt().solve(BtPA);
}

double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& P) {
  return (P - riccati_map(A, B, Q, R, P)).norm();
}

Matrix solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                  const DareOptions& opts) {
  check_problem(A, B, Q, R);
  if (!(opts.damping > 0.0 && opts.damping <= 1.0)) {
    throw ConfigError("DARE damping must lie in (0, 1]");
  }

  // Damped fixed point P <- (1 - a) P + a * riccati_map(P), started at Q.
  double alpha = opts.damping;
  Matrix P = Q;
  double last = dare_residual(A, B, Q, R, P);
  for (int it = 0; it < opts.max_iter && last > opts.tol; ++it) {
    Matrix next = symmetrized((1.0 - alpha) * P + alpha * riccati_map(A, B, Q, R, P));
    const double res = finite(next) ? dare_residual(A, B, Q, R, next) : INFINITY;
    if (!std::isfinite(res) || res > 1e6 * std::max(1.0, last)) {
      alpha *= 0.5;
      if (alpha < 1e-6) break;
      continue;
    }
    P = std::move(next);
    last = res;
  }
  if (last <= opts.tol) return polish(A, B, Q, R, std::move(P));

  // Backward value iteration from zero terminal cost. Monotone for
  // stabilizable pairs, so it survives cases where the sweep above stalls.
  P = Matrix::Zero(A.rows(), A.cols());
  for (int it = 0; it < opts.max_iter; ++it) {
    P = symmetrized(riccati_map(A, B, Q, R, P));
    if (!finite(P)) break;
    if (dare_residual(A, B, Q, R, P) <= opts.tol) return polish(A, B, Q, R, std::move(P));
  }
  std::ostringstream os;
  os << "DARE did not converge within " << opts.max_iter
     << " iterations (last fixed-point residual " << last << ")";
  throw NumericalError(os.str());
}

Gains gain_matrices(const Matrix& A, const Matrix& B, const Matrix& P, const Matrix& R) {
  const Matrix S = R + B.transpose() * P * B;
  Eigen::LLT<Matrix> llt(symmetrized(S));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("R + B'PB is not positive definite");
  }
  Gains g;
  g.K = llt.solve(B.transpose() * P * A);
  g.F = A - B * g.K;
  g.H = symmetrized(B * llt.solve(B.transpose()));
  return g;
}

double spectral_radius(const Matrix& M) {
  require_square(M, "spectral_radius argument");
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

GelfandFit fit_gelfand(const Matrix& F, int horizon, double margin) {
  GelfandFit fit;
  fit.rho = spectral_radius(F) + margin;
  fit.horizon = horizon;
  Matrix power = Matrix::Identity(F.rows(), F.cols());
  double rho_j = 1.0;
  for (int j = 0; j <= horizon; ++j) {
    Eigen::JacobiSVD<Matrix> svd(power);
    const double norm = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    fit.constant = std::max(fit.constant, norm / rho_j);
    power = power * F;
    rho_j *= fit.rho;
  }
  return fit;
}

SystemModel SystemModel::create(Matrix A, Matrix B, Matrix Q, Matrix R, double W,
                                const DareOptions& opts) {
  if (!(W > 0.0) || !std::isfinite(W)) throw ConfigError("disturbance bound W must be > 0");
  SystemModel model;
  model.P_ = solve_dare(A, B, Q, R, opts);
  if (min_eigenvalue(model.P_) <= 0.0) {
    throw ConfigError("DARE solution is not positive definite (is (Q, A) detectable?)");
  }
  Gains g = gain_matrices(A, B, model.P_, R);
  model.rho_ = spectral_radius(g.F);
  if (!(model.rho_ < 1.0)) {
    std::ostringstream os;
    os << "closed loop A - BK has spectral radius " << model.rho_ << " >= 1";
    throw ConfigError(os.str());
  }
  model.residual_ = dare_residual(A, B, Q, R, model.P_);
  const Matrix S = R + B.transpose() * model.P_ * B;
  model.input_map_ = symmetrized(S).llt().solve(B.transpose());
  model.PA_ = model.P_ * A;
  model.K_ = std::move(g.K);
  model.F_ = std::move(g.F);
  model.H_ = std::move(g.H);
  model.A_ = std::move(A);
  model.B_ = std::move(B);
  model.Q_ = std::move(Q);
  model.R_ = std::move(R);
  model.W_ = W;
  return model;
}

Vector SystemModel::feedback(const Vector& x, const Vector& s) const {
  if (x.size() != n() || s.size() != n()) throw DimensionError("feedback: expected length-n vectors");
  return -input_map_ * (PA_ * x + s);
}

std::vector<Matrix> SystemModel::weighted_powers(Index count) const {
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(std::max<Index>(count, 0)));
  Matrix current = P_;
  const Matrix Ft = F_.transpose();
  for (Index i = 0; i < count; ++i) {
    out.push_back(current);
    current = Ft * current;
  }
  return out;
}

}  // namespace ctxmpc
