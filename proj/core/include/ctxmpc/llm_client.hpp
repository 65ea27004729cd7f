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

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxmpc/error.hpp"

namespace ctxmpc {

// Effort levels and their numeric embedding values.
enum class EffortLevel : int { None = 0, Low = 1, Medium = 2, High = 3 };

// Case-insensitive "none" | "low" | "medium" | "high".
std::optional<EffortLevel> parse_effort(std::string_view word);
std::string_view effort_word(EffortLevel level);

struct ClassificationRequest {
  std::string template_id = "effort-v1";
  std::vector<std::string> channels;
  std::string description;

  // Wire form: {"template_id", "channels", "description"}.
  nlohmann::json to_json() const;
  static ClassificationRequest from_json(const nlohmann::json& j);
};

struct ClassificationResult {
  std::map<std::string, int> levels;  // channel -> 0..3
  std::string raw_response;
  std::chrono::milliseconds latency{0};
  bool fallback = false;  // true when levels are the all-zero substitute
};

// Stable 16-hex-digit key: FNV-1a 64 over the canonical (sorted-key, compact)
// JSON of the request.
std::string request_digest(const ClassificationRequest& request);

// Prompt text for the given template. Instructs the model to answer with
// exactly one level word per channel.
std::string render_prompt(const ClassificationRequest& request);

class ResponseParseError : public Error {
 public:
  using Error::Error;
};

// Parses {"levels": {channel: word}}. Every requested channel must be present
// with a recognized word.
ClassificationResult parse_response(const ClassificationRequest& request,
                                    const std::string& body);

ClassificationResult all_zero(const ClassificationRequest& request);

class JobClassifier {
 public:
  virtual ~JobClassifier() = default;
  virtual ClassificationResult classify(const ClassificationRequest& request) = 0;
};

// Append-only JSON-lines file of {"digest", "request", "response"} records.
// Later records for a digest shadow earlier ones. Internally synchronized.
class FixtureStore {
 public:
  FixtureStore() = default;  // in-memory only
  explicit FixtureStore(std::string path);

  std::optional<nlohmann::json> lookup(const std::string& digest) const;
  void append(const ClassificationRequest& request, const nlohmann::json& response);
  std::size_t size() const;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  mutable std::mutex mutex_;
  std::map<std::string, nlohmann::json> records_;
};

enum class MissPolicy { Error, ZeroFallback };

// Deterministic replay of a recorded response. Throws FixtureMissError on a
// miss under MissPolicy::Error.
ClassificationResult fixture_replay(const FixtureStore& store, const ClassificationRequest& request,
                                    MissPolicy policy);

class FixtureClassifier final : public JobClassifier {
 public:
  FixtureClassifier(std::shared_ptr<const FixtureStore> store, MissPolicy policy);
  ClassificationResult classify(const ClassificationRequest& request) override;

 private:
  std::shared_ptr<const FixtureStore> store_;
  MissPolicy policy_;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

// Moves one JSON request body to the service and returns the response body.
// Throws TransportError on timeouts and non-2xx statuses.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string post(const std::string& body, std::chrono::milliseconds timeout) = 0;
};

// POSTs to a single http(s) endpoint, e.g. "https://host:port/v1/classify".
// Sends "Authorization: Bearer <key>" when a key is configured. Each call
// opens its own connection, so concurrent posts need no locking.
class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string url, std::string api_key);
  std::string post(const std::string& body, std::chrono::milliseconds timeout) override;

 private:
  std::string origin_;
  std::string path_;
  std::string api_key_;
};

struct ClientOptions {
  int retries = 2;
  std::chrono::milliseconds timeout{10'000};
  std::chrono::milliseconds backoff{250};
  // Backoff never exceeds this; set to the control period.
  std::chrono::milliseconds backoff_cap{120'000};
};

// Live classifier. Never throws from classify(): transport failures are
// retried with exponential backoff, then degrade to all-zero levels with a
// warning, as do unparseable responses. Successful responses are appended to
// the recorder store, if any, for later hermetic replay.
class LlmClient final : public JobClassifier {
 public:
  LlmClient(std::shared_ptr<Transport> transport, ClientOptions options = {},
            std::shared_ptr<FixtureStore> recorder = nullptr);

  // Endpoint from CTXMPC_LLM_ENDPOINT, key from CTXMPC_LLM_API_KEY. Throws
  // ConfigError when the endpoint variable is unset.
  static LlmClient from_environment(ClientOptions options = {},
                                    std::shared_ptr<FixtureStore> recorder = nullptr);

  ClassificationResult classify(const ClassificationRequest& request) override;

  // Issues the requests concurrently and returns results in input order.
  std::vector<ClassificationResult> classify_all(std::span<const ClassificationRequest> requests);

 private:
  std::shared_ptr<Transport> transport_;
  ClientOptions options_;
  std::shared_ptr<FixtureStore> recorder_;
};

}  // namespace ctxmpc
