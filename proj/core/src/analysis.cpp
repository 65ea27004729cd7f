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

#include "ctxmpc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "ctxmpc/dynamics.hpp"
#include "ctxmpc/error.hpp"
#include "ctxmpc/mpc.hpp"
#include "ctxmpc/rng.hpp"

namespace ctxmpc {

namespace {

std::vector<Vector> realized(const RunTrace& trace) {
  std::vector<Vector> w;
  w.reserve(trace.steps.size());
  for (const auto& s : trace.steps) w.push_back(s.w);
  return w;
}

Vector x0_of(const RunTrace& trace) {
  if (trace.steps.empty()) return trace.terminal_state;
  return trace.steps.front().x;
}

// sum_i W_i v_i over the given vectors.
Vector weighted_sum(const std::vector<Matrix>& weights, const std::vector<Vector>& v, Index n) {
  Vector out = Vector::Zero(n);
  for (std::size_t i = 0; i < v.size(); ++i) out.noalias() += weights[i] * v[i];
  return out;
}

}  // namespace

PsiSequence psi_sequence(const SystemModel& model, const RunTrace& trace) {
  const Index T = trace.horizon();
  const auto w = realized(trace);
  const auto s = disturbance_feedforward(model, w);
  const Index k = std::max<Index>(trace.k, 1);
  const auto weights = model.weighted_powers(std::max<Index>(k, 1));
  PsiSequence out;
  out.psi.reserve(static_cast<std::size_t>(T));
  out.psi_hat.reserve(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) {
    const auto& preds = trace.steps[static_cast<std::size_t>(t)].predictions;
    if (static_cast<Index>(preds.size()) > k) throw TraceError("trace window longer than k");
    const Vector ff = weighted_sum(weights, preds, model.n());
    std::vector<Vector> window_w(w.begin() + t, w.begin() + t + static_cast<Index>(preds.size()));
    out.psi.push_back(s[static_cast<std::size_t>(t)] - ff);
    out.psi_hat.push_back(weighted_sum(weights, window_w, model.n()) - ff);
  }
  return out;
}

CostGap verify_cost_gap(const SystemModel& model, const RunTrace& trace) {
  const Index T = trace.horizon();
  const auto weights = model.weighted_powers(std::max<Index>(trace.k, 1));
  for (Index t = 0; t < T; ++t) {
    const auto& rec = trace.steps[static_cast<std::size_t>(t)];
    const Vector u = model.feedback(rec.x, weighted_sum(weights, rec.predictions, model.n()));
    if ((u - rec.u).norm() > 1e-8 * std::max(1.0, u.norm())) {
      throw TraceError("step " + std::to_string(t) + " was not produced by the explicit MPC action");
    }
  }
  const auto psi = psi_sequence(model, trace);
  CostGap gap;
  gap.cost = total_cost(trace, model);
  const auto w = realized(trace);
  gap.optimal = optimal_cost(model, x0_of(trace), w);
  for (const auto& p : psi.psi) gap.psi_energy += p.dot(model.H() * p);
  gap.residual = std::abs((gap.cost - gap.optimal) - gap.psi_energy) / std::max(1.0, gap.optimal);
  return gap;
}

double HindsightProblem::objective(const Vector& theta) const {
  return theta.dot(M * theta) - 2.0 * v.dot(theta) + c;
}

HindsightProblem hindsight_problem(const LoopInputs& inputs, const std::vector<Vector>& embeddings) {
  const SystemModel& model = *inputs.model;
  const Index T = inputs.horizon();
  const Index n = model.n();
  const Index q = inputs.decoder.dim();
  const auto weights = model.weighted_powers(inputs.k);
  const auto s = disturbance_feedforward(model, inputs.w);
  const Matrix& H = model.H();

  HindsightProblem prob{Matrix::Zero(q, q), Vector::Zero(q), 0.0};
  for (Index t = 0; t < T; ++t) {
    const Index last = horizon_end(t, inputs.k, T);
    Vector a = s[static_cast<std::size_t>(t)];
    Matrix J = Matrix::Zero(n, q);
    for (Index tau = t; tau <= last; ++tau) {
      const Matrix& Wi = weights[static_cast<std::size_t>(tau - t)];
      const Vector& d = embeddings[static_cast<std::size_t>(tau)];
      a.noalias() -= Wi * (known_term(inputs, tau) + inputs.decoder.offset(d));
      J.noalias() += Wi * inputs.decoder.jacobian(d);
    }
    const Matrix HJ = H * J;
    prob.M.noalias() += J.transpose() * HJ;
    prob.v.noalias() += HJ.transpose() * a;
    prob.c += a.dot(H * a);
  }
  return prob;
}

HindsightResult minimize_over_ball(const HindsightProblem& problem, const HypothesisSet& set) {
  const Index q = problem.M.rows();
  HindsightResult out;
  if (q == 0) {
    out.theta = Vector(0);
    out.objective = problem.c;
    return out;
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(problem.M);
  cod.setThreshold(1e-12);
  out.degenerate = cod.rank() < q;
  Vector theta = cod.solve(problem.v);
  if (!set.contains(theta, 1e-12 * std::max(1.0, set.radius()))) {
    out.on_boundary = true;
    const Vector& c0 = set.center();
    const Matrix I = Matrix::Identity(q, q);
    auto at = [&](double lambda) -> Vector {
      return (problem.M + lambda * I).ldlt().solve(problem.v + lambda * c0);
    };
    // ||theta(lambda) - c0|| decreases in lambda; bracket then bisect.
    double lo = 0.0;
    double hi = std::max(1.0, problem.M.norm());
    while ((at(hi) - c0).norm() > set.radius()) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((at(mid) - c0).norm() > set.radius()) lo = mid; else hi = mid;
    }
    theta = set.project(at(hi));
  }
  out.theta = theta;
  out.objective = problem.objective(theta);
  return out;
}

HindsightResult hindsight_theta(const LoopInputs& inputs, const std::vector<Vector>& embeddings,
                                const HypothesisSet& set) {
  return minimize_over_ball(hindsight_problem(inputs, embeddings), set);
}

std::vector<double> RegretReport::cumulative() const {
  std::vector<double> out(excess.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < excess.size(); ++t) {
    acc += excess[t] - excess_star[t];
    out[t] = acc;
  }
  return out;
}

nlohmann::json RegretReport::to_json() const {
  return {{"cost", cost},
          {"cost_star", cost_star},
          {"regret", regret},
          {"decomposed", decomposed},
          {"identity_residual", identity_residual},
          {"normalized", normalized},
          {"theta_star", std::vector<double>(theta_star.data(), theta_star.data() + theta_star.size())}};
}

RegretReport regret(const RunTrace& trace, const LoopInputs& inputs,
                    const std::vector<Vector>& embeddings, const Vector& theta_star) {
  if (trace.seed != inputs.seed || trace.horizon() != inputs.horizon()) {
    throw TraceError("regret: trace does not match the replay inputs (seed or horizon)");
  }
  for (Index t = 0; t < trace.horizon(); ++t) {
    if (trace.steps[static_cast<std::size_t>(t)].w != inputs.w[static_cast<std::size_t>(t)]) {
      throw TraceError("regret: disturbance mismatch at step " + std::to_string(t));
    }
  }
  const SystemModel& model = *inputs.model;
  LoopInputs frozen = inputs;
  frozen.theta0 = theta_star;
  const RunTrace replay = run_closed_loop(frozen, embeddings, std::nullopt);

  RegretReport rep;
  rep.theta_star = theta_star;
  rep.cost = total_cost(trace, model);
  rep.cost_star = total_cost(replay, model);
  rep.regret = rep.cost - rep.cost_star;

  const auto psi = psi_sequence(model, trace).psi;
  const auto phi = psi_sequence(model, replay).psi;
  rep.excess.reserve(psi.size());
  rep.excess_star.reserve(phi.size());
  for (std::size_t t = 0; t < psi.size(); ++t) {
    rep.excess.push_back(psi[t].dot(model.H() * psi[t]));
    rep.excess_star.push_back(phi[t].dot(model.H() * phi[t]));
    rep.decomposed += rep.excess.back() - rep.excess_star.back();
  }
  rep.identity_residual = std::abs(rep.regret - rep.decomposed) / std::max(1.0, std::abs(rep.regret));
  const double T = static_cast<double>(trace.horizon());
  rep.normalized = T > 1.0 ? rep.regret / std::sqrt(T * std::log(T)) : 0.0;
  return rep;
}

LdProbe ld_probe(const SystemModel& model, std::span<const Vector> w,
                 std::span<const Vector> embeddings, std::span<const Vector> known, Index t,
                 Index k) {
  const Index T = static_cast<Index>(w.size());
  if (t < 0 || t >= T) throw DimensionError("ld_probe: step out of range");
  const Index last = horizon_end(t, k, T);
  LdProbe probe;
  for (Index tau = t; tau <= last; ++tau) {
    const auto i = static_cast<std::size_t>(tau);
    probe.window.push_back({w[i], embeddings[i], known.empty() ? Vector() : known[i]});
  }
  // Tail sum_{tau > last} (F')^{tau-t} P w_tau, accumulated backwards.
  Vector tail = Vector::Zero(model.n());
  const Matrix Ft = model.F().transpose();
  for (Index tau = T - 1; tau > last; --tau) {
    tail = model.P() * w[static_cast<std::size_t>(tau)] + Ft * tail;
  }
  if (last + 1 < T) {
    for (Index i = t; i <= last; ++i) tail = Ft * tail;
  }
  probe.tail = tail;
  return probe;
}

double estimate_ld(const LossSpec& loss, const SystemModel& model, const AffineDecoder& decoder,
                   const HypothesisSet& set, const LdProbe& probe, Index samples,
                   std::uint64_t seed) {
  const Index q = decoder.dim();
  if (q == 0) return 0.0;
  const auto weights = model.weighted_powers(static_cast<Index>(probe.window.size()));
  const LossSpec trunc = loss.kind() == LossKind::Special
                             ? loss
                             : LossSpec::special(model, static_cast<Index>(probe.window.size()));
  const Matrix Jpsi = psi_jacobian(trunc, decoder, probe.window);
  const Matrix& H = model.H();

  auto gap = [&](const Vector& theta) {
    const Vector psi = truncated_psi(trunc, decoder, theta, probe.window) + probe.tail;
    const Vector true_grad = 2.0 * Jpsi.transpose() * (H * psi);
    return (loss_gradient(loss, decoder, theta, probe.window) - true_grad).norm();
  };

  std::vector<Vector> dirs;
  if (q == 1) {
    dirs = {Vector::Constant(1, 1.0), Vector::Constant(1, -1.0)};
  } else if (q == 2) {
    for (int i = 0; i < 720; ++i) {
      const double a = 2.0 * std::numbers::pi * i / 720.0;
      Vector u(2);
      u << std::cos(a), std::sin(a);
      dirs.push_back(u);
    }
  } else if (q == 3) {
    for (int i = 0; i <= 90; ++i) {
      const double polar = std::numbers::pi * i / 90.0;
      for (int j = 0; j < 180; ++j) {
        const double az = 2.0 * std::numbers::pi * j / 180.0;
        Vector u(3);
        u << std::sin(polar) * std::cos(az), std::sin(polar) * std::sin(az), std::cos(polar);
        dirs.push_back(u);
      }
    }
  } else {
    CounterRng rng(seed, /*stream=*/11);
    for (Index i = 0; i < samples; ++i) {
      Vector u(q);
      for (Index j = 0; j < q; ++j) u(j) = rng.normal();
      dirs.push_back(u.normalized());
    }
  }
  double best = gap(set.center());
  for (const auto& u : dirs) best = std::max(best, gap(set.center() + set.radius() * u));
  return best;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DimensionError("fit_line: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw NumericalError("fit_line: degenerate abscissae");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

std::vector<RobustnessPoint> robustness_diagnostics(const RunTrace& trace,
                                                    const AffineDecoder& decoder) {
  std::vector<RobustnessPoint> out;
  const Index T = trace.horizon();
  if (T == 0) return out;
  Vector sum = Vector::Zero(trace.steps.front().w.size());
  Index next = 1;  // checkpoint at t = next - 1
  for (Index t = 0; t < T; ++t) {
    const auto& rec = trace.steps[static_cast<std::size_t>(t)];
    sum += rec.w;
    const bool dyadic = t + 1 == next;
    if (dyadic) next *= 2;
    if (!dyadic && t != T - 1) continue;
    const Vector mean = sum / static_cast<double>(t + 1);
    const DecoderParams p = decoder.params(rec.theta);
    out.push_back({t, p.C.norm(), (p.b - mean).norm(), mean(0)});
  }
  return out;
}

double weighted_sum_min_singular(const SystemModel& model, Index k) {
  if (k < 1) throw ConfigError("weighted_sum_min_singular needs k >= 1");
  Matrix S = Matrix::Zero(model.n(), model.n());
  for (const auto& Wi : model.weighted_powers(k)) S += Wi;
  Eigen::JacobiSVD<Matrix> svd(S);
  return svd.singularValues().minCoeff();
}

}  // namespace ctxmpc
