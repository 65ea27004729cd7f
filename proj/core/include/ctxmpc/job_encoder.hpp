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
#include <mutex>
#include <string>
#include <vector>

#include "ctxmpc/cdp.hpp"
#include "ctxmpc/llm_client.hpp"

namespace ctxmpc {

// Embeds job descriptions through a classifier: each active record is
// classified into per-channel effort levels, which become one-hot level
// distributions and then level values. When several records are active on a
// step the highest level per channel wins. No records -> the zero embedding.
class JobEffortEncoder final : public Encoder {
 public:
  JobEffortEncoder(std::vector<std::string> channels, std::shared_ptr<JobClassifier> classifier,
                   Vector level_values = ScriptedEncoder::default_levels());

  Index dim() const override { return static_cast<Index>(channels_.size()); }
  Embedding encode(const StepContext& context) const override;

  // Classifications are memoized per description.
  std::size_t classified_count() const;

 private:
  std::vector<std::string> channels_;
  std::shared_ptr<JobClassifier> classifier_;
  Vector levels_;
  mutable std::mutex mutex_;
  mutable std::map<std::string, std::map<std::string, int>> cache_;
};

}  // namespace ctxmpc
