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
#include <span>
#include <vector>

#include "attreg/diff/tensor.hpp"

// Differentiable ops. Every op checks its output for NaN/Inf and throws
// NumericError; shape violations throw ShapeError.
namespace attreg::diff {

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// alpha * a + beta, elementwise.
Tensor affine(const Tensor& a, double alpha, double beta);

/// Adds the 1 x n row `bias` to every row of the m x n matrix `a`.
Tensor add_row(const Tensor& a, const Tensor& bias);

Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

/// [a | b] for matrices with equal row counts.
Tensor concat_cols(const Tensor& a, const Tensor& b);

/// Stacks the 1 x n row `a` `times` times.
Tensor repeat_rows(const Tensor& a, std::size_t times);

/// Embedding lookup: row `indices[i]` of `table` becomes output row i.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);

Tensor slice_row(const Tensor& a, std::size_t r);

/// Same values, new shape with equal element count.
Tensor reshape(const Tensor& a, Shape shape);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// Sum of scalar tensors. Empty input gives a constant 0.
Tensor add_all(std::span<const Tensor> terms);

/// Softmax restricted to entries with mask[i] == true. Masked entries are
/// exactly zero; the rest sum to one. Output has the shape of `scores`.
Tensor masked_softmax(const Tensor& scores, const std::vector<bool>& mask);

/// sum_i weights[i] * rows[i]: K x d rows, K weights -> 1 x d.
Tensor weighted_sum(const Tensor& rows, const Tensor& weights);

/// Sum over entries of the binary cross-entropy between sigmoid(logits) and
/// `targets`, evaluated as max(x,0) - x*y + log1p(exp(-|x|)).
/// Gradients flow to `logits` only.
Tensor sigmoid_bce_loss(const Tensor& logits, const Tensor& targets);

}  // namespace attreg::diff
