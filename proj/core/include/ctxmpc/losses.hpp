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

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "ctxmpc/cdp.hpp"
#include "ctxmpc/lqr.hpp"
#include "ctxmpc/rng.hpp"

namespace ctxmpc {

enum class LossKind { Mse, Mae, Special };

LossKind parse_loss_kind(std::string_view name);
std::string_view loss_kind_name(LossKind kind);

// Window averaging for MSE/MAE. Verbatim divides by (T_end - t), one less than
// the number of terms, and by 1 when the window has a single term. TermCount
// divides by the number of terms.
enum class WindowNormalizer { Verbatim, TermCount };

// One realized step of a matured prediction window.
struct WindowSample {
  Vector w;      // realized disturbance
  Vector d;      // embedding used for the prediction
  Vector known;  // known part of w added outside the decoder
};

class LossSpec {
 public:
  static LossSpec mse(WindowNormalizer normalizer = WindowNormalizer::Verbatim);
  static LossSpec mae(WindowNormalizer normalizer = WindowNormalizer::Verbatim);
  // psi_hat' H psi_hat with psi_hat = sum_i (F')^i P (w_{t+i} - what_{t+i}).
  static LossSpec special(const SystemModel& model, Index k);
  static LossSpec make(LossKind kind, const SystemModel& model, Index k,
                       WindowNormalizer normalizer = WindowNormalizer::Verbatim);

  LossKind kind() const { return kind_; }
  WindowNormalizer normalizer() const { return normalizer_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  const Matrix& H() const { return H_; }

  double scale(Index terms) const;

 private:
  LossKind kind_ = LossKind::Mse;
  WindowNormalizer normalizer_ = WindowNormalizer::Verbatim;
  std::vector<Matrix> weights_;  // (F')^i P, Special only
  Matrix H_;
};

// Residual w - known - g_theta(d).
Vector residual(const AffineDecoder& decoder, const Vector& theta, const WindowSample& s);

// Special-loss pieces: psi_hat(theta) and d psi_hat / d theta (= -sum W_i J_i).
Vector truncated_psi(const LossSpec& spec, const AffineDecoder& decoder, const Vector& theta,
                     std::span<const WindowSample> window);
Matrix psi_jacobian(const LossSpec& spec, const AffineDecoder& decoder,
                    std::span<const WindowSample> window);

double loss_value(const LossSpec& spec, const AffineDecoder& decoder, const Vector& theta,
                  std::span<const WindowSample> window);

// Analytic gradient with respect to theta. The MAE subgradient uses sign(0) = 0.
Vector loss_gradient(const LossSpec& spec, const AffineDecoder& decoder, const Vector& theta,
                     std::span<const WindowSample> window);

// Draws (theta, window) pairs for gradient_bound_estimate.
using WindowSampler =
    std::function<std::pair<Vector, std::vector<WindowSample>>(CounterRng& rng)>;

struct GradientBound {
  double value = 0.0;     // safety * max_norm, or the floor
  double max_norm = 0.0;  // largest sampled gradient norm
  bool floored = false;
};

// Empirical max of ||grad L|| over `samples` draws, inflated by `safety`.
// A zero estimate is rejected in favour of `floor`.
GradientBound gradient_bound_estimate(const LossSpec& spec, const AffineDecoder& decoder,
                                      const WindowSampler& sampler, Index samples,
                                      std::uint64_t seed, double safety = 1.5,
                                      double floor = 1.0);

}  // namespace ctxmpc
