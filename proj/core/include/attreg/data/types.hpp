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

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace attreg::data {

enum class QuestionCategory { kYesNo, kNumber, kOther };

inline constexpr std::array<QuestionCategory, 3> kAllCategories = {
    QuestionCategory::kYesNo, QuestionCategory::kNumber, QuestionCategory::kOther};

std::string_view to_string(QuestionCategory c);
QuestionCategory parse_category(std::string_view s);

/// One object proposal: a feature vector plus the detector's category token.
struct ObjectDetection {
  int id = 0;
  std::string category;
  std::vector<std::string> attributes;  // {color, size}
  std::vector<double> feature;
  std::array<double, 4> box{};  // x1, y1, x2, y2 in the unit square
  bool active = true;

  bool operator==(const ObjectDetection&) const = default;
};

struct Scene {
  std::string scene_id;
  std::vector<ObjectDetection> detections;

  std::size_t active_count() const;
  std::vector<bool> active_mask() const;
  /// Deactivates the detection with the given id. Feature values are untouched.
  void deactivate(int id);

  bool operator==(const Scene&) const = default;
};

struct QAInstance {
  std::string qid;
  std::string scene_id;
  std::vector<std::string> question_tokens;
  QuestionCategory question_category = QuestionCategory::kOther;
  /// Template identifier ("what color", "how many", ...); the unit at which
  /// answer priors are defined.
  std::string question_type;
  std::vector<std::string> answers;  // one per simulated annotator
  std::vector<std::string> nouns;
  std::vector<int> gt_key_object_ids;

  bool operator==(const QAInstance&) const = default;
};

struct Example {
  Scene scene;
  QAInstance qa;

  bool operator==(const Example&) const = default;
};

inline constexpr std::string_view kTrainSplit = "train";
inline constexpr std::string_view kValSplit = "val_indomain";
inline constexpr std::string_view kTestSplit = "test_ood";

struct DatasetSplit {
  std::string name;
  std::size_t num_objects = 0;  // K
  std::size_t feature_dim = 0;  // d_v
  std::vector<std::string> answer_vocab;
  std::vector<Example> instances;

  /// Index of `answer` in answer_vocab; throws VocabularyError otherwise.
  std::size_t answer_index(std::string_view answer) const;

  bool operator==(const DatasetSplit&) const = default;
};

inline constexpr std::size_t kAnnotatorsPerQuestion = 10;
inline constexpr std::size_t kMaxQuestionLength = 14;

}  // namespace attreg::data
