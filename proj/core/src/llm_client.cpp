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

#include "ctxmpc/llm_client.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include "ctxmpc/log.hpp"

namespace ctxmpc {

namespace {

std::string lower_trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n\"'.");
  auto e = s.find_last_not_of(" \t\r\n\"'.");
  if (b == std::string_view::npos) return {};
  std::string out(s.substr(b, e - b + 1));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::optional<EffortLevel> parse_effort(std::string_view word) {
  const std::string w = lower_trim(word);
  if (w == "none") return EffortLevel::None;
  if (w == "low") return EffortLevel::Low;
  if (w == "medium") return EffortLevel::Medium;
  if (w == "high") return EffortLevel::High;
  return std::nullopt;
}

std::string_view effort_word(EffortLevel level) {
  switch (level) {
    case EffortLevel::None: return "none";
    case EffortLevel::Low: return "low";
    case EffortLevel::Medium: return "medium";
    case EffortLevel::High: return "high";
  }
  return "none";
}

nlohmann::json ClassificationRequest::to_json() const {
  return {{"template_id", template_id}, {"channels", channels}, {"description", description}};
}

ClassificationRequest ClassificationRequest::from_json(const nlohmann::json& j) {
  ClassificationRequest r;
  r.template_id = j.at("template_id").get<std::string>();
  r.channels = j.at("channels").get<std::vector<std::string>>();
  r.description = j.at("description").get<std::string>();
  return r;
}

std::string request_digest(const ClassificationRequest& request) {
  // nlohmann::json objects keep keys sorted, so dump() is canonical.
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(request.to_json().dump())));
  return buf;
}

std::string render_prompt(const ClassificationRequest& request) {
  if (request.template_id != "effort-v1") {
    throw ConfigError("unknown prompt template: " + request.template_id);
  }
  std::ostringstream os;
  os << "You estimate the compute effort of jobs on a small solar-powered cluster.\n"
     << "For each resource channel below, answer with exactly one word from "
     << "{none, low, medium, high}: none if the job does not use that resource.\n"
     << "Channels:";
  for (const auto& c : request.channels) os << ' ' << c;
  os << "\nJob description:\n" << request.description << "\n"
     << "Reply as JSON: {\"levels\": {\"<channel>\": \"<word>\", ...}} and nothing else.\n";
  return os.str();
}

ClassificationResult parse_response(const ClassificationRequest& request,
                                    const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ResponseParseError(std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("levels") || !j["levels"].is_object()) {
    throw ResponseParseError("response lacks a 'levels' object");
  }
  ClassificationResult r;
  r.raw_response = body;
  for (const auto& ch : request.channels) {
    if (!j["levels"].contains(ch) || !j["levels"][ch].is_string()) {
      throw ResponseParseError("response has no level for channel '" + ch + "'");
    }
    auto level = parse_effort(j["levels"][ch].get<std::string>());
    if (!level) throw ResponseParseError("unrecognized level for channel '" + ch + "'");
    r.levels[ch] = static_cast<int>(*level);
  }
  return r;
}

ClassificationResult all_zero(const ClassificationRequest& request) {
  ClassificationResult r;
  for (const auto& ch : request.channels) r.levels[ch] = 0;
  return r;
}

FixtureStore::FixtureStore(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;  // created on first append
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto rec = nlohmann::json::parse(line);
      const std::string digest = rec.at("digest").get<std::string>();
      if (digest != request_digest(ClassificationRequest::from_json(rec.at("request")))) {
        throw ConfigError("digest does not match request");
      }
      records_[digest] = rec.at("response");
    } catch (const ConfigError&) {
      throw ConfigError("fixture store " + path_ + " line " + std::to_string(lineno) +
                        ": digest does not match request");
    } catch (const std::exception& e) {
      throw ConfigError("fixture store " + path_ + " line " + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
}

std::optional<nlohmann::json> FixtureStore::lookup(const std::string& digest) const {
  std::lock_guard lock(mutex_);
  auto it = records_.find(digest);
  if (it == records_.end()) return std::nullopt;
  return std::optional<nlohmann::json>(std::in_place, it->second);
}

void FixtureStore::append(const ClassificationRequest& request, const nlohmann::json& response) {
  const std::string digest = request_digest(request);
  nlohmann::json rec = {{"digest", digest}, {"request", request.to_json()}, {"response", response}};
  std::lock_guard lock(mutex_);
  records_[digest] = response;
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error("cannot append to fixture store " + path_);
    out << rec.dump() << '\n';
  }
}

std::size_t FixtureStore::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

ClassificationResult fixture_replay(const FixtureStore& store, const ClassificationRequest& request,
                                    MissPolicy policy) {
  const std::string digest = request_digest(request);
  auto response = store.lookup(digest);
  if (!response) {
    if (policy == MissPolicy::Error) {
      throw FixtureMissError("no fixture for request " + digest);
    }
    auto r = all_zero(request);
    r.fallback = true;
    return r;
  }
  const std::string body = response->is_string() ? response->get<std::string>() : response->dump();
  return parse_response(request, body);
}

FixtureClassifier::FixtureClassifier(std::shared_ptr<const FixtureStore> store, MissPolicy policy)
    : store_(std::move(store)), policy_(policy) {}

ClassificationResult FixtureClassifier::classify(const ClassificationRequest& request) {
  if (request.channels.empty()) throw ConfigError("classification request has no channels");
  if (request.description.empty()) return all_zero(request);
  return fixture_replay(*store_, request, policy_);
}

LlmClient::LlmClient(std::shared_ptr<Transport> transport, ClientOptions options,
                     std::shared_ptr<FixtureStore> recorder)
    : transport_(std::move(transport)), options_(options), recorder_(std::move(recorder)) {}

LlmClient LlmClient::from_environment(ClientOptions options,
                                      std::shared_ptr<FixtureStore> recorder) {
  const char* endpoint = std::getenv("CTXMPC_LLM_ENDPOINT");
  if (!endpoint || !*endpoint) throw ConfigError("CTXMPC_LLM_ENDPOINT is not set");
  const char* key = std::getenv("CTXMPC_LLM_API_KEY");
  return LlmClient(std::make_shared<HttpTransport>(endpoint, key ? key : ""), options,
                   std::move(recorder));
}

ClassificationResult LlmClient::classify(const ClassificationRequest& request) {
  if (request.channels.empty()) throw ConfigError("classification request has no channels");
  if (request.description.empty()) return all_zero(request);

  nlohmann::json body = request.to_json();
  body["prompt"] = render_prompt(request);
  const std::string payload = body.dump();

  const auto started = std::chrono::steady_clock::now();
  auto delay = options_.backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::min(delay, options_.backoff_cap));
      delay *= 2;
    }
    std::string response;
    try {
      response = transport_->post(payload, options_.timeout);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    try {
      auto result = parse_response(request, response);
      result.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - started);
      if (recorder_) recorder_->append(request, nlohmann::json::parse(response));
      return result;
    } catch (const ResponseParseError& e) {
      logger()->warn("classifier response unusable ({}); using all-zero levels", e.what());
      auto r = all_zero(request);
      r.raw_response = response;
      r.fallback = true;
      return r;
    }
  }
  logger()->warn("classifier unreachable after {} attempts ({}); using all-zero levels",
                 options_.retries + 1, last_error);
  auto r = all_zero(request);
  r.fallback = true;
  r.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  return r;
}

std::vector<ClassificationResult> LlmClient::classify_all(
    std::span<const ClassificationRequest> requests) {
  std::vector<std::future<ClassificationResult>> pending;
  pending.reserve(requests.size());
  for (const auto& req : requests) {
    pending.push_back(std::async(std::launch::async, [this, &req] { return classify(req); }));
  }
  std::vector<ClassificationResult> out;
  out.reserve(requests.size());
  for (auto& f : pending) out.push_back(f.get());
  return out;
}

}  // namespace ctxmpc
