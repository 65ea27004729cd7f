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

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ctxmpc/mpc.hpp"
#include "ctxmpc/types.hpp"

namespace ctxmpc {

enum class ContextSource { Human, Log, Scripted };

// One piece of external context, e.g. a job description valid over
// [start, end) in control steps.
struct ContextRecord {
  double start = 0.0;
  double end = 0.0;
  std::string channel;
  std::string description;
  ContextSource source = ContextSource::Scripted;
  std::map<std::string, double> metadata;
};

// All context visible for step tau, plus the part of w_tau that is known
// exactly (the reference term in tracking problems; zero otherwise).
struct StepContext {
  Index step = 0;
  std::vector<ContextRecord> records;
  Vector known;
};

struct Embedding {
  Vector values;
  std::vector<std::string> provenance;  // one label per entry
};

// entry_i = sum_j probs[i](j) * values[i](j). Each probability vector must be
// nonnegative and sum to 1 within 1e-9.
Embedding encode_categorical(std::span<const Vector> level_probs,
                             std::span<const Vector> level_values);

// Affine last layer g(d) = C d + b.
struct DecoderParams {
  Matrix C;  // n x p
  Vector b;  // n

  // vec(C) (column-major) followed by b.
  Vector packed() const;
  static DecoderParams unpack(const Vector& packed, Index n, Index p);
};

Vector decode(const DecoderParams& params, const Vector& d);

// Euclidean ball {theta : ||theta - center|| <= radius}.
class HypothesisSet {
 public:
  HypothesisSet(Vector center, double radius);

  Vector project(const Vector& theta) const;
  bool contains(const Vector& theta, double slack = 1e-12) const;
  double diameter() const { return 2.0 * radius_; }
  double radius() const { return radius_; }
  const Vector& center() const { return center_; }

 private:
  Vector center_;
  double radius_;
};

Vector project(const Vector& theta, const HypothesisSet& set);

// g_theta(d) = C(theta) d + b(theta), where theta is the subset of vec(C, b)
// listed in `free`; every other entry stays at its value in `base`. Affine in
// theta, so the Jacobian depends on d only.
class AffineDecoder {
 public:
  AffineDecoder(Index n, Index p, std::vector<Index> free, DecoderParams base);

  // Every entry of C and b is tunable.
  static AffineDecoder full(Index n, Index p);
  // Only b is tunable; C fixed at zero.
  static AffineDecoder bias_only(Index n, Index p);
  // No tunable entries: g(d) = C d + b for the given constants.
  static AffineDecoder fixed(DecoderParams params);

  Index n() const { return n_; }
  Index p() const { return p_; }
  Index dim() const { return static_cast<Index>(free_.size()); }
  const std::vector<Index>& free_indices() const { return free_; }

  DecoderParams params(const Vector& theta) const;
  Vector theta_of(const DecoderParams& params) const;

  Vector operator()(const Vector& theta, const Vector& d) const;
  // d g / d theta, n x dim().
  Matrix jacobian(const Vector& d) const;
  // g evaluated with every free entry at zero.
  Vector offset(const Vector& d) const;

 private:
  Index n_;
  Index p_;
  std::vector<Index> free_;
  DecoderParams base_;
};

// Maps the context of one step to an embedding. Implementations are pure
// given their (frozen) configuration.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual Index dim() const = 0;
  virtual Embedding encode(const StepContext& context) const = 0;
};

// d_i = sum over records of metadata[keys[i]] / scales[i] (missing keys count
// as 0). Scales default to 1.
class MetadataEncoder final : public Encoder {
 public:
  explicit MetadataEncoder(std::vector<std::string> keys, std::vector<double> scales = {});
  Index dim() const override { return static_cast<Index>(keys_.size()); }
  Embedding encode(const StepContext& context) const override;

 private:
  std::vector<std::string> keys_;
  std::vector<double> scales_;
};

// Reads per-feature level probabilities from a fixture table.
//
// Format: whitespace-separated columns, '#' starts a comment,
//   <channel> <start> <end> <p_0> <p_1> ... <p_{L-1}>
// A row applies to steps tau with start <= tau < end. Steps without a row for
// a channel get the "no context" distribution (all mass on level 0).
class ScriptedEncoder final : public Encoder {
 public:
  struct Row {
    std::string channel;
    double start;
    double end;
    Vector probs;
  };

  ScriptedEncoder(std::vector<std::string> channels, std::vector<Row> rows,
                  Vector level_values = default_levels());
  static ScriptedEncoder from_file(const std::string& path, std::vector<std::string> channels,
                                   Vector level_values = default_levels());
  static std::vector<Row> parse(std::istream& in);
  static Vector default_levels();

  Index dim() const override { return static_cast<Index>(channels_.size()); }
  Embedding encode(const StepContext& context) const override;

 private:
  std::vector<std::string> channels_;
  std::vector<Row> rows_;
  Vector levels_;
};

// Per-step embedding entry kept alongside a prediction so the loss can be
// evaluated once the true disturbance is known.
struct WindowEntry {
  Vector d;
  Vector known;
};

struct WindowPrediction {
  PredictionWindow window;
  std::vector<WindowEntry> entries;
};

// Encodes each step context, decodes, adds the known term and clips to the
// W-ball. An encoder exception for some tau degrades that tau to the zero
// embedding and logs a warning; FixtureMissError propagates.
WindowPrediction predict_window(const Encoder& encoder, const AffineDecoder& decoder,
                                const Vector& theta, std::span<const StepContext> contexts,
                                double W, Index k);

// Embeds one step with the same failure handling as predict_window.
Embedding embed_or_zero(const Encoder& encoder, const StepContext& context);

}  // namespace ctxmpc
