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
#include <string_view>

namespace ctxmpc {

// Counter-based generator: the i-th draw of stream (seed, stream) is a pure
// function of (seed, stream, i), so sequences are identical on every
// platform and substreams never overlap in practice.
//
// Algorithm id "splitmix64-ctr/1": key = mix(seed) ^ mix(stream + gamma),
// output_i = mix(key + (i + 1) * gamma), where mix is the SplitMix64
// finalizer. Changing this is a format break for stored traces.
class CounterRng {
 public:
  static constexpr std::string_view kAlgorithm = "splitmix64-ctr/1";

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi);
  // Box-Muller; relies on std::log/std::cos, which are correctly rounded on
  // glibc but not guaranteed bit-identical across libm implementations.
  double normal();
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi_inclusive);

  CounterRng fork(std::uint64_t stream) const;

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

}  // namespace ctxmpc
