/*
 * Copyright 2026 The AttReg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "attreg/data/types.hpp"

#include <algorithm>

#include "attreg/error.hpp"

namespace attreg::data {

std::string_view to_string(QuestionCategory c) {
  switch (c) {
    case QuestionCategory::kYesNo: return "yesno";
    case QuestionCategory::kNumber: return "number";
    case QuestionCategory::kOther: return "other";
  }
  return "other";
}

QuestionCategory parse_category(std::string_view s) {
  if (s == "yesno") return QuestionCategory::kYesNo;
  if (s == "number") return QuestionCategory::kNumber;
  if (s == "other") return QuestionCategory::kOther;
  throw FormatError("unknown question category '" + std::string(s) + "'");
}

std::size_t Scene::active_count() const {
  return static_cast<std::size_t>(
      std::count_if(detections.begin(), detections.end(), [](const auto& d) { return d.active; }));
}

std::vector<bool> Scene::active_mask() const {
  std::vector<bool> mask(detections.size());
  for (std::size_t i = 0; i < detections.size(); ++i) mask[i] = detections[i].active;
  return mask;
}

void Scene::deactivate(int id) {
  for (auto& d : detections) {
    if (d.id == id) {
      d.active = false;
      return;
    }
  }
  throw ConfigError("scene " + scene_id + " has no detection with id " + std::to_string(id));
}

std::size_t DatasetSplit::answer_index(std::string_view answer) const {
  auto it = std::find(answer_vocab.begin(), answer_vocab.end(), answer);
  if (it == answer_vocab.end()) {
    throw VocabularyError("answer '" + std::string(answer) + "' is not in the answer vocabulary");
  }
  return static_cast<std::size_t>(it - answer_vocab.begin());
}

}  // namespace attreg::data
