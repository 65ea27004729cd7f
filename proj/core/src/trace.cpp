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

#include "ctxmpc/trace.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "ctxmpc/dynamics.hpp"
#include "ctxmpc/error.hpp"

namespace ctxmpc {

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, end);
}

double RunTrace::recorded_cost() const {
  double cost = terminal_cost;
  for (const auto& s : steps) cost += s.stage_cost;
  return cost;
}

Vector RunTrace::final_theta() const {
  return steps.empty() ? Vector() : steps.back().theta;
}

double total_cost(const RunTrace& trace, const SystemModel& model) {
  if (trace.terminal_state.size() != model.n()) {
    throw TraceError("trace has no terminal state");
  }
  double cost = 0.0;
  for (const auto& s : trace.steps) {
    if (s.x.size() != model.n() || s.u.size() != model.m()) {
      throw TraceError("trace step has inconsistent dimensions");
    }
    cost += stage_cost(model, s.x, s.u);
  }
  return cost + terminal_cost(model, trace.terminal_state);
}

namespace {

void put_vector(std::ostream& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) out << ',' << format_double(v(i));
}

void put_blank(std::ostream& out, Index count) {
  for (Index i = 0; i < count; ++i) out << ',';
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw TraceError("malformed number in trace: '" + s + "'");
  }
  return v;
}

}  // namespace

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  Index n = trace.terminal_state.size();
  Index m = trace.steps.empty() ? 0 : trace.steps.front().u.size();
  Index q = trace.steps.empty() ? 0 : trace.steps.front().theta.size();
  const Index k = trace.k;

  out << "# ctxmpc-trace v1 seed=" << trace.seed << " digest=" << trace.config_digest
      << " k=" << k << '\n';
  out << 't';
  for (Index i = 0; i < n; ++i) out << ",x_" << i;
  for (Index i = 0; i < m; ++i) out << ",u_" << i;
  for (Index i = 0; i < n; ++i) out << ",w_" << i;
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < n; ++i) out << ",what_" << j << '_' << i;
  for (Index i = 0; i < q; ++i) out << ",theta_" << i;
  out << ",stage_cost,update_source,eta,grad_norm\n";

  for (const auto& s : trace.steps) {
    out << s.t;
    put_vector(out, s.x);
    put_vector(out, s.u);
    put_vector(out, s.w);
    for (Index j = 0; j < k; ++j) {
      if (j < static_cast<Index>(s.predictions.size())) {
        put_vector(out, s.predictions[static_cast<std::size_t>(j)]);
      } else {
        put_blank(out, n);
      }
    }
    put_vector(out, s.theta);
    out << ',' << format_double(s.stage_cost);
    if (s.update_source) {
      out << ',' << *s.update_source << ',' << format_double(s.eta) << ','
          << format_double(s.grad_norm);
    } else {
      out << ",,,";
    }
    out << '\n';
  }
  out << trace.horizon();
  put_vector(out, trace.terminal_state);
  put_blank(out, m + n + k * n + q);
  out << ',' << format_double(trace.terminal_cost) << ",,,\n";
}

RunTrace read_trace_csv(std::istream& in) {
  RunTrace trace;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ctxmpc-trace v1", 0) != 0) {
    throw TraceError("missing ctxmpc-trace v1 header");
  }
  {
    std::istringstream is(line.substr(17));
    std::string tok;
    while (is >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const auto key = tok.substr(0, eq);
      const auto val = tok.substr(eq + 1);
      if (key == "seed") trace.seed = std::stoull(val);
      if (key == "digest") trace.config_digest = val;
      if (key == "k") trace.k = std::stoll(val);
    }
  }
  if (!std::getline(in, line)) throw TraceError("missing column header");
  const auto header = split(line, ',');
  Index n = 0, m = 0, q = 0;
  for (const auto& h : header) {
    if (h.rfind("x_", 0) == 0) ++n;
    if (h.rfind("u_", 0) == 0) ++m;
    if (h.rfind("theta_", 0) == 0) ++q;
  }
  const Index k = trace.k;
  const std::size_t expected = static_cast<std::size_t>(1 + n + m + n + k * n + q + 4);
  if (header.size() != expected) throw TraceError("column header does not match k");

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (cells.size() != expected) throw TraceError("row has wrong number of fields");
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw TraceError("trace has no terminal row");

  auto read_vec = [](const std::vector<std::string>& cells, std::size_t at, Index len) {
    Vector v(len);
    for (Index i = 0; i < len; ++i) v(i) = parse_double(cells[at + static_cast<std::size_t>(i)]);
    return v;
  };

  for (std::size_t r = 0; r + 1 < rows.size(); ++r) {
    const auto& c = rows[r];
    StepRecord s;
    std::size_t at = 0;
    s.t = std::stoll(c[at++]);
    s.x = read_vec(c, at, n);
    at += static_cast<std::size_t>(n);
    s.u = read_vec(c, at, m);
    at += static_cast<std::size_t>(m);
    s.w = read_vec(c, at, n);
    at += static_cast<std::size_t>(n);
    for (Index j = 0; j < k; ++j) {
      if (!c[at].empty()) s.predictions.push_back(read_vec(c, at, n));
      at += static_cast<std::size_t>(n);
    }
    s.theta = read_vec(c, at, q);
    at += static_cast<std::size_t>(q);
    s.stage_cost = parse_double(c[at++]);
    if (!c[at].empty()) {
      s.update_source = std::stoll(c[at]);
      s.eta = parse_double(c[at + 1]);
      s.grad_norm = parse_double(c[at + 2]);
    }
    trace.steps.push_back(std::move(s));
  }
  const auto& last = rows.back();
  trace.terminal_state = read_vec(last, 1, n);
  trace.terminal_cost = parse_double(last[expected - 4]);
  if (std::stoll(last[0]) != trace.horizon()) throw TraceError("terminal row index mismatch");
  return trace;
}

nlohmann::json trace_summary(const RunTrace& trace, const SystemModel& model) {
  nlohmann::json j;
  j["seed"] = trace.seed;
  j["config_digest"] = trace.config_digest;
  j["horizon"] = trace.horizon();
  j["k"] = trace.k;
  j["total_cost"] = total_cost(trace, model);
  j["terminal_cost"] = trace.terminal_cost;
  j["clip_count"] = trace.clip_count;
  std::size_t updates = 0;
  for (const auto& s : trace.steps) updates += s.update_source.has_value();
  j["updates"] = updates;
  const Vector theta = trace.final_theta();
  j["final_theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
  return j;
}

}  // namespace ctxmpc
