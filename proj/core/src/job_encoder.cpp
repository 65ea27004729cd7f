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

#include "ctxmpc/job_encoder.hpp"

#include <algorithm>

namespace ctxmpc {

JobEffortEncoder::JobEffortEncoder(std::vector<std::string> channels,
                                   std::shared_ptr<JobClassifier> classifier, Vector level_values)
    : channels_(std::move(channels)),
      classifier_(std::move(classifier)),
      levels_(std::move(level_values)) {
  if (channels_.empty()) throw ConfigError("job encoder needs at least one channel");
  if (levels_.size() != 4) throw ConfigError("job encoder needs four level values");
}

Embedding JobEffortEncoder::encode(const StepContext& context) const {
  std::vector<int> level(channels_.size(), 0);
  for (const auto& rec : context.records) {
    if (rec.description.empty()) continue;
    std::map<std::string, int> levels;
    {
      std::lock_guard lock(mutex_);
      auto it = cache_.find(rec.description);
      if (it != cache_.end()) levels = it->second;
    }
    if (levels.empty()) {
      ClassificationRequest req;
      req.channels = channels_;
      req.description = rec.description;
      levels = classifier_->classify(req).levels;
      std::lock_guard lock(mutex_);
      cache_.emplace(rec.description, levels);
    }
    for (std::size_t i = 0; i < channels_.size(); ++i) {
      auto it = levels.find(channels_[i]);
      if (it != levels.end()) level[i] = std::max(level[i], it->second);
    }
  }
  std::vector<Vector> probs;
  std::vector<Vector> values(channels_.size(), levels_);
  for (int l : level) {
    Vector p = Vector::Zero(4);
    p(std::clamp(l, 0, 3)) = 1.0;
    probs.push_back(std::move(p));
  }
  Embedding e = encode_categorical(probs, values);
  for (std::size_t i = 0; i < channels_.size(); ++i) e.provenance[i] = "effort:" + channels_[i];
  return e;
}

std::size_t JobEffortEncoder::classified_count() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

}  // namespace ctxmpc
