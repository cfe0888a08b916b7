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

#include "attreg/diff/tensor.hpp"

#include <algorithm>

#include "attreg/error.hpp"

namespace attreg::diff {

namespace {
thread_local Tape* active_tape = nullptr;
}

std::string to_string(Shape s) {
  return "[" + std::to_string(s.rows) + "x" + std::to_string(s.cols) + "]";
}

std::vector<double>& detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from(shape, std::vector<double>(shape.size(), 0.0), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape.size()) {
    throw ShapeError("tensor of shape " + to_string(shape) + " given " +
                     std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v) { return from({1, 1}, {v}); }

Tensor Tensor::row(std::vector<double> values) {
  const Shape shape{1, values.size()};
  return from(shape, std::move(values));
}

const Shape& Tensor::shape() const { return node_->shape; }

std::span<const double> Tensor::values() const { return node_->value; }

std::span<double> Tensor::mutable_values() { return node_->value; }

double Tensor::operator()(std::size_t r, std::size_t c) const {
  return node_->value[r * node_->shape.cols + c];
}

double Tensor::item() const {
  if (node_->shape.size() != 1) {
    throw ShapeError("item() on non-scalar " + to_string(node_->shape));
  }
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const double> Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

const std::string& Tensor::name() const { return node_->name; }

Tensor& Tensor::set_name(std::string name) {
  node_->name = std::move(name);
  return *this;
}

Tensor Tensor::clone(bool requires_grad) const {
  Tensor copy = from(shape(), node_->value, requires_grad);
  copy.node_->name = node_->name;
  return copy;
}

Tape::Tape() : previous_(active_tape) { active_tape = this; }

Tape::~Tape() { active_tape = previous_; }

Tape* Tape::active() { return active_tape; }

void Tape::record(const Tensor& out, BackwardFn fn) {
  auto* node = out.node();
  node->requires_grad = true;
  node->tape = this;
  node->tape_index = entries_.size();
  entries_.push_back({out.node_ptr(), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw TapeError("backward called twice on the same tape");
  if (!loss.defined() || loss.size() != 1) {
    throw TapeError("backward requires a scalar loss");
  }
  auto* root = loss.node();
  if (root->tape != this) {
    throw TapeError("loss was not recorded on this tape");
  }
  consumed_ = true;
  root->grad_buffer()[0] = 1.0;
  for (std::size_t i = root->tape_index + 1; i-- > 0;) {
    auto& entry = entries_[i];
    if (entry.out->grad.empty()) continue;
    entry.fn(entry.out->grad);
  }
  // Release the graph; intermediate nodes die with their last handle.
  entries_.clear();
  entries_.shrink_to_fit();
}

}  // namespace attreg::diff
