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

#include "ctxmpc/cdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "ctxmpc/error.hpp"
#include "ctxmpc/log.hpp"

namespace ctxmpc {

Embedding encode_categorical(std::span<const Vector> level_probs,
                             std::span<const Vector> level_values) {
  if (level_probs.size() != level_values.size()) {
    throw DimensionError("encode_categorical: feature count mismatch");
  }
  Embedding e;
  e.values.resize(static_cast<Index>(level_probs.size()));
  for (std::size_t i = 0; i < level_probs.size(); ++i) {
    const Vector& p = level_probs[i];
    const Vector& v = level_values[i];
    if (p.size() != v.size()) throw DimensionError("encode_categorical: level count mismatch");
    if (!v.allFinite()) throw ConfigError("encode_categorical: level values must be finite");
    if ((p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-9) {
      throw ConfigError("encode_categorical: probabilities must be nonnegative and sum to 1");
    }
    e.values(static_cast<Index>(i)) = p.dot(v);
    e.provenance.push_back("categorical[" + std::to_string(i) + "]");
  }
  return e;
}

Vector DecoderParams::packed() const {
  Vector out(C.size() + b.size());
  out.head(C.size()) = C.reshaped();
  out.tail(b.size()) = b;
  return out;
}

DecoderParams DecoderParams::unpack(const Vector& packed, Index n, Index p) {
  if (packed.size() != n * p + n) throw DimensionError("DecoderParams::unpack: wrong length");
  DecoderParams out;
  out.C = packed.head(n * p).reshaped(n, p);
  out.b = packed.tail(n);
  return out;
}

Vector decode(const DecoderParams& params, const Vector& d) {
  if (params.C.cols() != d.size()) throw DimensionError("decode: embedding length mismatch");
  if (params.C.rows() != params.b.size()) throw DimensionError("decode: C/b row mismatch");
  return params.C * d + params.b;
}

HypothesisSet::HypothesisSet(Vector center, double radius)
    : center_(std::move(center)), radius_(radius) {
  if (!(radius_ > 0.0)) throw ConfigError("hypothesis set radius must be > 0");
}

Vector HypothesisSet::project(const Vector& theta) const {
  if (theta.size() != center_.size()) throw DimensionError("project: dimension mismatch");
  const Vector diff = theta - center_;
  const double dist = diff.norm();
  if (dist <= radius_) return theta;
  return center_ + diff * (radius_ / dist);
}

bool HypothesisSet::contains(const Vector& theta, double slack) const {
  return (theta - center_).norm() <= radius_ * (1.0 + slack);
}

Vector project(const Vector& theta, const HypothesisSet& set) { return set.project(theta); }

AffineDecoder::AffineDecoder(Index n, Index p, std::vector<Index> free, DecoderParams base)
    : n_(n), p_(p), free_(std::move(free)), base_(std::move(base)) {
  if (base_.C.rows() != n_ || base_.C.cols() != p_ || base_.b.size() != n_) {
    throw DimensionError("AffineDecoder: base parameters have wrong shape");
  }
  const Index total = n_ * p_ + n_;
  std::vector<Index> sorted = free_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("AffineDecoder: duplicate free index");
  }
  for (Index i : free_) {
    if (i < 0 || i >= total) throw ConfigError("AffineDecoder: free index out of range");
  }
}

AffineDecoder AffineDecoder::full(Index n, Index p) {
  std::vector<Index> free(static_cast<std::size_t>(n * p + n));
  for (std::size_t i = 0; i < free.size(); ++i) free[i] = static_cast<Index>(i);
  return AffineDecoder(n, p, std::move(free), {Matrix::Zero(n, p), Vector::Zero(n)});
}

AffineDecoder AffineDecoder::bias_only(Index n, Index p) {
  std::vector<Index> free;
  for (Index i = 0; i < n; ++i) free.push_back(n * p + i);
  return AffineDecoder(n, p, std::move(free), {Matrix::Zero(n, p), Vector::Zero(n)});
}

AffineDecoder AffineDecoder::fixed(DecoderParams params) {
  const Index n = params.C.rows();
  const Index p = params.C.cols();
  return AffineDecoder(n, p, {}, std::move(params));
}

DecoderParams AffineDecoder::params(const Vector& theta) const {
  if (theta.size() != dim()) throw DimensionError("AffineDecoder: theta has wrong length");
  Vector packed = base_.packed();
  for (std::size_t i = 0; i < free_.size(); ++i) packed(free_[i]) = theta(static_cast<Index>(i));
  return DecoderParams::unpack(packed, n_, p_);
}

Vector AffineDecoder::theta_of(const DecoderParams& params) const {
  const Vector packed = params.packed();
  if (packed.size() != n_ * p_ + n_) throw DimensionError("AffineDecoder: params have wrong shape");
  Vector theta(dim());
  for (std::size_t i = 0; i < free_.size(); ++i) theta(static_cast<Index>(i)) = packed(free_[i]);
  return theta;
}

Vector AffineDecoder::operator()(const Vector& theta, const Vector& d) const {
  return decode(params(theta), d);
}

Matrix AffineDecoder::jacobian(const Vector& d) const {
  if (d.size() != p_) throw DimensionError("AffineDecoder: embedding has wrong length");
  Matrix J = Matrix::Zero(n_, dim());
  for (std::size_t c = 0; c < free_.size(); ++c) {
    const Index idx = free_[c];
    if (idx < n_ * p_) {
      // C(row, col) multiplies d(col) into output row.
      J(idx % n_, static_cast<Index>(c)) = d(idx / n_);
    } else {
      J(idx - n_ * p_, static_cast<Index>(c)) = 1.0;
    }
  }
  return J;
}

Vector AffineDecoder::offset(const Vector& d) const {
  return (*this)(Vector::Zero(dim()), d);
}

MetadataEncoder::MetadataEncoder(std::vector<std::string> keys, std::vector<double> scales)
    : keys_(std::move(keys)), scales_(std::move(scales)) {
  if (scales_.empty()) scales_.assign(keys_.size(), 1.0);
  if (scales_.size() != keys_.size()) throw DimensionError("metadata encoder: one scale per key");
  for (double s : scales_) {
    if (!(s > 0.0)) throw ConfigError("metadata encoder: scales must be > 0");
  }
}

Embedding MetadataEncoder::encode(const StepContext& context) const {
  Embedding e;
  e.values = Vector::Zero(dim());
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    for (const auto& rec : context.records) {
      auto it = rec.metadata.find(keys_[i]);
      if (it != rec.metadata.end()) e.values(static_cast<Index>(i)) += it->second / scales_[i];
    }
    e.provenance.push_back("metadata:" + keys_[i]);
  }
  return e;
}

ScriptedEncoder::ScriptedEncoder(std::vector<std::string> channels, std::vector<Row> rows,
                                 Vector level_values)
    : channels_(std::move(channels)), rows_(std::move(rows)), levels_(std::move(level_values)) {
  for (const auto& r : rows_) {
    if (r.probs.size() != levels_.size()) {
      throw ConfigError("scripted encoder row for '" + r.channel + "' has " +
                        std::to_string(r.probs.size()) + " probabilities, expected " +
                        std::to_string(levels_.size()));
    }
    if (!(r.end > r.start)) throw ConfigError("scripted encoder row has empty window");
  }
  // Windows of one channel must not overlap once sorted.
  for (const auto& ch : channels_) {
    std::vector<const Row*> own;
    for (const auto& r : rows_)
      if (r.channel == ch) own.push_back(&r);
    std::sort(own.begin(), own.end(), [](auto* a, auto* b) { return a->start < b->start; });
    for (std::size_t i = 1; i < own.size(); ++i) {
      if (own[i]->start < own[i - 1]->end) {
        throw ConfigError("scripted encoder windows overlap on channel '" + ch + "'");
      }
    }
  }
}

Vector ScriptedEncoder::default_levels() { return Vector::LinSpaced(4, 0.0, 3.0); }

std::vector<ScriptedEncoder::Row> ScriptedEncoder::parse(std::istream& in) {
  std::vector<Row> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream is(line);
    Row r;
    if (!(is >> r.channel)) continue;
    if (!(is >> r.start >> r.end)) {
      throw ConfigError("scripted encoder table line " + std::to_string(lineno) +
                        ": expected <channel> <start> <end> <probs...>");
    }
    std::vector<double> p;
    double v;
    while (is >> v) p.push_back(v);
    if (!is.eof()) {
      throw ConfigError("scripted encoder table line " + std::to_string(lineno) +
                        ": malformed probability");
    }
    r.probs = Eigen::Map<const Vector>(p.data(), static_cast<Index>(p.size()));
    rows.push_back(std::move(r));
  }
  return rows;
}

ScriptedEncoder ScriptedEncoder::from_file(const std::string& path,
                                           std::vector<std::string> channels,
                                           Vector level_values) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scripted encoder table: " + path);
  return ScriptedEncoder(std::move(channels), parse(in), std::move(level_values));
}

Embedding ScriptedEncoder::encode(const StepContext& context) const {
  const auto tau = static_cast<double>(context.step);
  std::vector<Vector> probs;
  std::vector<Vector> values(channels_.size(), levels_);
  for (const auto& ch : channels_) {
    Vector p = Vector::Zero(levels_.size());
    p(0) = 1.0;  // no context
    for (const auto& r : rows_) {
      if (r.channel == ch && r.start <= tau && tau < r.end) {
        p = r.probs;
        break;
      }
    }
    probs.push_back(std::move(p));
  }
  Embedding e = encode_categorical(probs, values);
  for (std::size_t i = 0; i < channels_.size(); ++i) e.provenance[i] = "scripted:" + channels_[i];
  return e;
}

Embedding embed_or_zero(const Encoder& encoder, const StepContext& context) {
  try {
    Embedding e = encoder.encode(context);
    if (e.values.size() != encoder.dim()) throw DimensionError("encoder returned wrong length");
    return e;
  } catch (const FixtureMissError&) {
    throw;  // a broken replay setup, not an unreadable context
  } catch (const std::exception& ex) {
    logger()->warn("encoder failed at step {}: {}; using zero embedding", context.step,
                   ex.what());
    Embedding e;
    e.values = Vector::Zero(encoder.dim());
    e.provenance.assign(static_cast<std::size_t>(encoder.dim()), "fallback:zero");
    return e;
  }
}

WindowPrediction predict_window(const Encoder& encoder, const AffineDecoder& decoder,
                                const Vector& theta, std::span<const StepContext> contexts,
                                double W, Index k) {
  if (contexts.empty()) throw DimensionError("predict_window: no contexts");
  if (static_cast<Index>(contexts.size()) > k) {
    throw DimensionError("predict_window: more contexts than the horizon k");
  }
  WindowPrediction out;
  out.window.t = contexts.front().step;
  out.window.k = k;
  for (const auto& ctx : contexts) {
    Embedding e = embed_or_zero(encoder, ctx);
    Vector known = ctx.known.size() ? ctx.known : Vector::Zero(decoder.n());
    bool clipped = false;
    out.window.predictions.push_back(clip_to_ball(known + decoder(theta, e.values), W, &clipped));
    out.window.clipped += clipped;
    out.entries.push_back({std::move(e.values), std::move(known)});
  }
  return out;
}

}  // namespace ctxmpc
