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

#include <stdexcept>
#include <string>

namespace ctxmpc {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid user-supplied configuration or model data (asymmetric costs,
// unstable closed loop, malformed config file, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Iterative numerics that failed to meet their tolerance.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A tuner update was requested before its window's disturbances were known.
class ImmatureWindowError : public Error {
 public:
  using Error::Error;
};

class FixtureMissError : public Error {
 public:
  using Error::Error;
};

class TraceError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctxmpc
