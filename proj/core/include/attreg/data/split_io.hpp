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

#include <filesystem>
#include <iosfwd>

#include "attreg/data/types.hpp"

namespace attreg::data {

inline constexpr int kSplitFormatVersion = 1;

// JSON-lines layout: line 1 is a header
//   {"format_version", "name", "answer_vocab", "K", "d_v", "num_instances"}
// followed by one record per instance with the scene embedded inline.
void write_split(std::ostream& out, const DatasetSplit& split);
void write_split(const std::filesystem::path& path, const DatasetSplit& split);

/// Throws FormatError("line N: ...") on the first malformed or missing line.
DatasetSplit read_split(std::istream& in);
DatasetSplit read_split(const std::filesystem::path& path);

}  // namespace attreg::data
