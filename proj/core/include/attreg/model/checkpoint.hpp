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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "attreg/model/model.hpp"

namespace attreg::model {

inline constexpr int kCheckpointFormatVersion = 1;

/// Stable hash of the model configuration and vocabularies.
std::uint64_t config_hash(const Model& model);

/// Hash of every parameter value; equal iff the weights are bit-identical.
std::uint64_t params_hash(const ModelParams& params);

/// JSON checkpoint with config, vocabularies and every named parameter block.
void save_checkpoint(std::ostream& out, const Model& model);
void save_checkpoint(const std::filesystem::path& path, const Model& model);

/// Throws FormatError on malformed input or shape mismatches.
Model load_checkpoint(std::istream& in);
Model load_checkpoint(const std::filesystem::path& path);

/// Throws VocabularyError when the checkpoint's answer vocabulary differs from
/// the dataset's.
void require_answer_vocab(const Model& model, const std::vector<std::string>& answer_vocab);

}  // namespace attreg::model
