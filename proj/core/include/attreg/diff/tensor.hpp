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

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace attreg::diff {

/// Row-major matrix shape. Vectors are 1 x n rows, scalars are 1 x 1.
struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(Shape s);

class Tape;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::string name;
  const Tape* tape = nullptr;  // recording tape, null for leaves
  std::size_t tape_index = 0;

  std::vector<double>& grad_buffer();
};

}  // namespace detail

/// Handle to a dense double-precision matrix, optionally tracked for
/// reverse-mode differentiation.
///
/// Copies share the underlying storage. Values are never modified by ops;
/// only optimizer steps and explicit loaders write through mutable_values().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v);
  static Tensor row(std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const { return shape().size(); }
  std::span<const double> values() const;
  std::span<double> mutable_values();
  double operator()(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const;
  /// Gradient accumulated by the last backward pass. Empty if none reached it.
  std::span<const double> grad() const;
  void zero_grad();

  const std::string& name() const;
  Tensor& set_name(std::string name);

  /// Deep copy detached from any tape.
  Tensor clone(bool requires_grad) const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node> node_;
};

/// Define-by-run record of differentiable operations.
///
/// Constructing a Tape makes it the active tape of the calling thread until
/// it is destroyed. Ops executed while a tape is active and touching at least
/// one requires_grad input are recorded on it; with no active tape ops only
/// compute values. Each tape supports exactly one backward pass.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  /// Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable
  /// from `loss`, which must be a 1 x 1 tensor recorded on this tape.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

  using BackwardFn = std::function<void(const std::vector<double>& out_grad)>;
  void record(const Tensor& out, BackwardFn fn);

 private:
  struct Entry {
    std::shared_ptr<detail::Node> out;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  Tape* previous_ = nullptr;
  bool consumed_ = false;
};

}  // namespace attreg::diff
