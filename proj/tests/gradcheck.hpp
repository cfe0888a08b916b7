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

// Central finite-difference oracle. It only ever evaluates forward values
// with no tape active, so it shares nothing with the backward pass it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "attreg/diff/tensor.hpp"

namespace attreg::testing {

struct GradCheck {
  double max_rel_error = 0.0;  // worst block, norm-wise
  std::size_t blocks = 0;
};

/// Norm-wise relative error ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  if (scale < 1e-12) return std::sqrt(diff);
  return std::sqrt(diff) / scale;
}

inline std::vector<double> numeric_gradient(const std::function<double()>& f, diff::Tensor& x,
                                            double h = 1e-5) {
  auto values = x.mutable_values();
  std::vector<double> g(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = f();
    values[i] = saved - h;
    const double down = f();
    values[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Compares tape gradients of `loss_fn` with central differences for every
/// tensor in `inputs` (which must be requires_grad leaves).
inline GradCheck check_gradients(const std::function<diff::Tensor()>& loss_fn,
                                 std::vector<diff::Tensor> inputs, double h = 1e-5) {
  for (auto& t : inputs) t.zero_grad();
  {
    diff::Tape tape;
    diff::Tensor loss = loss_fn();
    tape.backward(loss);
  }
  GradCheck result;
  auto value = [&] { return loss_fn().item(); };
  for (auto& t : inputs) {
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    if (analytic.empty()) analytic.assign(t.size(), 0.0);
    const auto numeric = numeric_gradient(value, t, h);
    result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic, numeric));
    ++result.blocks;
  }
  return result;
}

inline diff::Tensor random_tensor(diff::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                                  double hi = 1.0, bool requires_grad = true) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape.size());
  for (double& x : v) x = dist(rng);
  return diff::Tensor::from(shape, std::move(v), requires_grad);
}

}  // namespace attreg::testing
