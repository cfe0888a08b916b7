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

#include "attreg/data/split_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "attreg/error.hpp"

namespace attreg::data {

using nlohmann::json;

void to_json(json& j, const ObjectDetection& d) {
  j = json{{"id", d.id},         {"category", d.category}, {"attributes", d.attributes},
           {"feature", d.feature}, {"box", d.box},           {"active", d.active}};
}

void from_json(const json& j, ObjectDetection& d) {
  j.at("id").get_to(d.id);
  j.at("category").get_to(d.category);
  j.at("attributes").get_to(d.attributes);
  j.at("feature").get_to(d.feature);
  j.at("box").get_to(d.box);
  j.at("active").get_to(d.active);
}

namespace {

json record(const Example& ex) {
  return json{{"qid", ex.qa.qid},
              {"scene", {{"scene_id", ex.scene.scene_id}, {"detections", ex.scene.detections}}},
              {"question_tokens", ex.qa.question_tokens},
              {"question_category", std::string(to_string(ex.qa.question_category))},
              {"question_type", ex.qa.question_type},
              {"answers", ex.qa.answers},
              {"nouns", ex.qa.nouns},
              {"gt_key_object_ids", ex.qa.gt_key_object_ids}};
}

Example parse_record(const json& j, const DatasetSplit& split) {
  Example ex;
  j.at("qid").get_to(ex.qa.qid);
  const auto& scene = j.at("scene");
  scene.at("scene_id").get_to(ex.scene.scene_id);
  scene.at("detections").get_to(ex.scene.detections);
  ex.qa.scene_id = ex.scene.scene_id;
  j.at("question_tokens").get_to(ex.qa.question_tokens);
  ex.qa.question_category = parse_category(j.at("question_category").get<std::string>());
  j.at("question_type").get_to(ex.qa.question_type);
  j.at("answers").get_to(ex.qa.answers);
  j.at("nouns").get_to(ex.qa.nouns);
  j.at("gt_key_object_ids").get_to(ex.qa.gt_key_object_ids);

  if (ex.scene.detections.size() != split.num_objects) {
    throw FormatError("scene has " + std::to_string(ex.scene.detections.size()) +
                      " detections, header says K=" + std::to_string(split.num_objects));
  }
  for (const auto& d : ex.scene.detections) {
    if (d.feature.size() != split.feature_dim) {
      throw FormatError("detection feature has dimension " + std::to_string(d.feature.size()));
    }
  }
  if (ex.qa.answers.size() != kAnnotatorsPerQuestion) {
    throw FormatError("expected " + std::to_string(kAnnotatorsPerQuestion) + " answers, got " +
                      std::to_string(ex.qa.answers.size()));
  }
  return ex;
}

}  // namespace

void write_split(std::ostream& out, const DatasetSplit& split) {
  const json header{{"format_version", kSplitFormatVersion},
                    {"name", split.name},
                    {"answer_vocab", split.answer_vocab},
                    {"K", split.num_objects},
                    {"d_v", split.feature_dim},
                    {"num_instances", split.instances.size()}};
  out << header.dump() << '\n';
  for (const auto& ex : split.instances) out << record(ex).dump() << '\n';
}

void write_split(const std::filesystem::path& path, const DatasetSplit& split) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_split(out, split);
  if (!out) throw FormatError("failed writing " + path.string());
}

DatasetSplit read_split(std::istream& in) {
  DatasetSplit split;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected = 0;
  auto fail = [&](const std::string& what) -> FormatError {
    return FormatError("line " + std::to_string(line_no) + ": " + what);
  };

  if (!std::getline(in, line)) {
    line_no = 1;
    throw fail("missing header");
  }
  line_no = 1;
  try {
    const json header = json::parse(line);
    const int version = header.at("format_version").get<int>();
    if (version != kSplitFormatVersion) {
      throw fail("unsupported format_version " + std::to_string(version));
    }
    header.at("name").get_to(split.name);
    header.at("answer_vocab").get_to(split.answer_vocab);
    header.at("K").get_to(split.num_objects);
    header.at("d_v").get_to(split.feature_dim);
    header.at("num_instances").get_to(expected);
  } catch (const json::exception& e) {
    throw fail(std::string("bad header: ") + e.what());
  }

  split.instances.reserve(expected);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) throw fail("empty record");
    try {
      split.instances.push_back(parse_record(json::parse(line), split));
    } catch (const json::exception& e) {
      throw fail(e.what());
    } catch (const FormatError& e) {
      throw fail(e.what());
    }
  }
  if (split.instances.size() != expected) {
    ++line_no;
    throw fail("file truncated: header announces " + std::to_string(expected) +
               " instances, found " + std::to_string(split.instances.size()));
  }
  return split;
}

DatasetSplit read_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_split(in);
}

}  // namespace attreg::data
