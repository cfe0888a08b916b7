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

#include <stdexcept>
#include <string>

namespace attreg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf appeared in a value or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the differentiation tape (e.g. a second backward pass).
class TapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files or configuration values.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A token or answer outside the known vocabulary.
class VocabularyError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or precondition violation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace attreg
