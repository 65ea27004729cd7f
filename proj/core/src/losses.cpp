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

#include "ctxmpc/error.hpp"

namespace ctxmpc {

LossKind parse_loss_kind(std::string_view name) {
  if (name == "mse") return LossKind::Mse;
  if (name == "mae") return LossKind::Mae;
  if (name == "special") return LossKind::Special;
  throw ConfigError("unknown loss kind '" + std::string(name) + "' (mse | mae | special)");
}

std::string_view loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Mse: return "mse";
    case LossKind::Mae: return "mae";
    case LossKind::Special: return "special";
  }
  return "?";
}

LossSpec LossSpec::mse(WindowNormalizer normalizer) {
  LossSpec s;
  s.kind_ = LossKind::Mse;
  s.normalizer_ = normalizer;
  return s;
}

LossSpec LossSpec::mae(WindowNormalizer normalizer) {
  LossSpec s;
  s.kind_ = LossKind::Mae;
  s.normalizer_ = normalizer;
  return s;
}

LossSpec LossSpec::special(const SystemModel& model, Index k) {
  if (k < 1) throw ConfigError("special loss needs k >= 1");
  LossSpec s;
  s.kind_ = LossKind::Special;
  s.weights_ = model.weighted_powers(k);
  s.H_ = model.H();
  return s;
}

LossSpec LossSpec::make(LossKind kind, const SystemModel& model, Index k,
                        WindowNormalizer normalizer) {
  switch (kind) {
    case LossKind::Mse: return mse(normalizer);
    case LossKind::Mae: return mae(normalizer);
    case LossKind::Special: return special(model, k);
  }
  throw ConfigError("unknown loss kind");
}

double LossSpec::scale(Index terms) const {
  if (normalizer_ == WindowNormalizer::TermCount) return 1.0 / static_cast<double>(terms);
  return 1.0 / static_cast<double>(std::max<Index>(terms - 1, 1));
}

namespace {

void check_window(const LossSpec& spec, std::span<const WindowSample> window) {
  if (window.empty()) throw DimensionError("loss: empty window");
  for (const auto& s : window) {
    if (s.w.size() == 0) throw ImmatureWindowError("loss: realized disturbance missing");
  }
  if (spec.kind() == LossKind::Special && window.size() > spec.weights().size()) {
    throw DimensionError("special loss: window longer than k");
  }
}

}  // namespace

Vector residual(const AffineDecoder& decoder, const Vector& theta, const WindowSample& s) {
  Vector r = s.w - decoder(theta, s.d);
  if (s.known.size()) r -= s.known;
  return r;
}

Vector truncated_psi(const LossSpec& spec, const AffineDecoder& decoder, const Vector& theta,
                     std::span<const WindowSample> window) {
  Vector psi = Vector::Zero(decoder.n());
  for (std::size_t i = 0; i < window.size(); ++i) {
    psi.noalias() += spec.weights()[i] * residual(decoder, theta, window[i]);
  }
  return psi;
}

Matrix psi_jacobian(const LossSpec& spec, const AffineDecoder& decoder,
                    std::span<const WindowSample> window) {
  Matrix J = Matrix::Zero(decoder.n(), decoder.dim());
  for (std::size_t i = 0; i < window.size(); ++i) {
    J.noalias() -= spec.weights()[i] * decoder.jacobian(window[i].d);
  }
  return J;
}

double loss_value(const LossSpec& spec, const AffineDecoder& decoder, const Vector& theta,
                  std::span<const WindowSample> window) {
  check_window(spec, window);
  switch (spec.kind()) {
    case LossKind::Special: {
      const Vector psi = truncated_psi(spec, decoder, theta, window);
      return psi.dot(spec.H() * psi);
    }
    case LossKind::Mse: {
      double sum = 0.0;
      for (const auto& s : window) sum += residual(decoder, theta, s).squaredNorm();
      return spec.scale(static_cast<Index>(window.size())) * sum;
    }
    case LossKind::Mae: {
      double sum = 0.0;
      for (const auto& s : window) sum += residual(decoder, theta, s).cwiseAbs().sum();
      return spec.scale(static_cast<Index>(window.size())) * sum;
    }
  }
  return 0.0;
}

Vector loss_gradient(const LossSpec& spec, const AffineDecoder& decoder, const Vector& theta,
                     std::span<const WindowSample> window) {
  check_window(spec, window);
  Vector grad = Vector::Zero(decoder.dim());
  switch (spec.kind()) {
    case LossKind::Special: {
      const Vector psi = truncated_psi(spec, decoder, theta, window);
      grad = 2.0 * psi_jacobian(spec, decoder, window).transpose() * (spec.H() * psi);
      break;
    }
    case LossKind::Mse: {
      for (const auto& s : window) {
        grad.noalias() -= 2.0 * decoder.jacobian(s.d).transpose() * residual(decoder, theta, s);
      }
      grad *= spec.scale(static_cast<Index>(window.size()));
      break;
    }
    case LossKind::Mae: {
      for (const auto& s : window) {
        const Vector r = residual(decoder, theta, s);
        const Vector sign = r.unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
        grad.noalias() -= decoder.jacobian(s.d).transpose() * sign;
      }
      grad *= spec.scale(static_cast<Index>(window.size()));
      break;
    }
  }
  return grad;
}

GradientBound gradient_bound_estimate(const LossSpec& spec, const AffineDecoder& decoder,
                                      const WindowSampler& sampler, Index samples,
                                      std::uint64_t seed, double safety, double floor) {
  if (!(floor > 0.0)) throw ConfigError("gradient bound floor must be > 0");
  CounterRng rng(seed, /*stream=*/7);
  GradientBound out;
  for (Index i = 0; i < samples; ++i) {
    auto [theta, window] = sampler(rng);
    out.max_norm = std::max(out.max_norm, loss_gradient(spec, decoder, theta, window).norm());
  }
  out.value = safety * out.max_norm;
  if (!(out.value > 0.0)) {
    out.value = floor;
    out.floored = true;
  }
  return out;
}

}  // namespace ctxmpc
