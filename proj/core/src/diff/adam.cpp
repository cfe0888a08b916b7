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

#include "attreg/diff/adam.hpp"

#include <cmath>
#include <string>

#include "attreg/error.hpp"

namespace attreg::diff {

void adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& config) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t b = 0; b < params.size(); ++b) {
      state.m[b].assign(params[b].size(), 0.0);
      state.v[b].assign(params[b].size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state has " + std::to_string(state.m.size()) +
                     " blocks, got " + std::to_string(params.size()));
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (state.m[b].size() != params[b].size()) {
      throw ShapeError("adam_step: state size mismatch for block '" + params[b].name() + "'");
    }
    for (double g : params[b].grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient in block '" + params[b].name() + "'");
      }
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto grad = params[b].grad();
    auto values = params[b].mutable_values();
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

}  // namespace attreg::diff
