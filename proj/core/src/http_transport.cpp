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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace ctxmpc {

HttpTransport::HttpTransport(std::string url, std::string api_key) : api_key_(std::move(api_key)) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  origin_ = url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url.substr(slash);
}

std::string HttpTransport::post(const std::string& body, std::chrono::milliseconds timeout) {
  httplib::Client client(origin_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(path_, headers, body, "application/json");
  if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("endpoint returned HTTP " + std::to_string(res->status));
  }
  return res->body;
}

}  // namespace ctxmpc
