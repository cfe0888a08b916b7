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

#include "attreg/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "attreg/error.hpp"

namespace attreg::diff {

namespace {

using NodePtr = std::shared_ptr<detail::Node>;

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

// Builds the output tensor, validates it and records `backward` on the active
// tape when any input is tracked.
template <class Backward>
Tensor emit(const char* op, Shape shape, std::vector<double> values,
            std::initializer_list<const Tensor*> inputs, Backward&& backward) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op) + ": produced a non-finite value");
    }
  }
  Tensor out = Tensor::from(shape, std::move(values));
  Tape* tape = Tape::active();
  if (tape == nullptr) return out;
  const bool tracked = std::any_of(inputs.begin(), inputs.end(),
                                   [](const Tensor* t) { return t->requires_grad(); });
  if (tracked) tape->record(out, std::forward<Backward>(backward));
  return out;
}

// Null when `t` does not need a gradient, so closures can skip the work.
NodePtr grad_target(const Tensor& t) {
  return t.requires_grad() ? t.node_ptr() : nullptr;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape sa = a.shape(), sb = b.shape();
  require(sa.cols == sb.rows, "matmul",
          "inner dimensions differ: " + to_string(sa) + " * " + to_string(sb));
  const std::size_t m = sa.rows, k = sa.cols, n = sb.cols;
  std::vector<double> out(m * n, 0.0);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  NodePtr an = a.node_ptr(), bn = b.node_ptr();
  return emit("matmul", {m, n}, std::move(out), {&a, &b},
              [an, bn, m, k, n](const std::vector<double>& g) {
                if (an->requires_grad) {
                  auto& ga = an->grad_buffer();
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                      double acc = 0.0;
                      for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bn->value[p * n + j];
                      ga[i * k + p] += acc;
                    }
                }
                if (bn->requires_grad) {
                  auto& gb = bn->grad_buffer();
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                      const double aip = an->value[i * k + p];
                      if (aip == 0.0) continue;
                      for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                    }
                }
              });
}

namespace {

enum class Binary { kAdd, kSub, kMul };

Tensor binary(const char* op, Binary kind, const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), op,
          "shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  const auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (kind) {
      case Binary::kAdd: out[i] = av[i] + bv[i]; break;
      case Binary::kSub: out[i] = av[i] - bv[i]; break;
      case Binary::kMul: out[i] = av[i] * bv[i]; break;
    }
  }
  NodePtr an = grad_target(a), bn = grad_target(b);
  NodePtr av_keep = a.node_ptr(), bv_keep = b.node_ptr();
  return emit(op, a.shape(), std::move(out), {&a, &b},
              [an, bn, av_keep, bv_keep, kind](const std::vector<double>& g) {
                if (an) {
                  auto& ga = an->grad_buffer();
                  for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += kind == Binary::kMul ? g[i] * bv_keep->value[i] : g[i];
                }
                if (bn) {
                  auto& gb = bn->grad_buffer();
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    switch (kind) {
                      case Binary::kAdd: gb[i] += g[i]; break;
                      case Binary::kSub: gb[i] -= g[i]; break;
                      case Binary::kMul: gb[i] += g[i] * av_keep->value[i]; break;
                    }
                  }
                }
              });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", Binary::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", Binary::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", Binary::kMul, a, b); }

Tensor reshape(const Tensor& a, Shape shape) {
  require(shape.size() == a.size(), "reshape",
          to_string(a.shape()) + " cannot become " + to_string(shape));
  const auto av = a.values();
  NodePtr an = a.node_ptr();
  return emit("reshape", shape, std::vector<double>(av.begin(), av.end()), {&a},
              [an](const std::vector<double>& g) {
                auto& ga = an->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
              });
}

Tensor affine(const Tensor& a, double alpha, double beta) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * av[i] + beta;
  NodePtr an = a.node_ptr();
  return emit("affine", a.shape(), std::move(out), {&a},
              [an, alpha](const std::vector<double>& g) {
                auto& ga = an->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += alpha * g[i];
              });
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
  const Shape s = a.shape();
  require(bias.shape() == Shape{1, s.cols}, "add_row",
          "bias " + to_string(bias.shape()) + " does not match " + to_string(s));
  const auto av = a.values(), bv = bias.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j) out[i * s.cols + j] = av[i * s.cols + j] + bv[j];
  NodePtr an = grad_target(a), bn = grad_target(bias);
  return emit("add_row", s, std::move(out), {&a, &bias},
              [an, bn, s](const std::vector<double>& g) {
                if (an) {
                  auto& ga = an->grad_buffer();
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                }
                if (bn) {
                  auto& gb = bn->grad_buffer();
                  for (std::size_t i = 0; i < s.rows; ++i)
                    for (std::size_t j = 0; j < s.cols; ++j) gb[j] += g[i * s.cols + j];
                }
              });
}

namespace {

// Elementwise op whose derivative is a function of the output value.
template <class Fwd, class DerivFromOut>
Tensor unary(const char* op, const Tensor& a, Fwd fwd, DerivFromOut deriv) {
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i]);
  NodePtr an = a.node_ptr();
  std::vector<double> saved = out;
  return emit(op, a.shape(), std::move(out), {&a},
              [an, saved = std::move(saved), deriv](const std::vector<double>& g) {
                auto& ga = an->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(saved[i]);
              });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary("sigmoid", a, stable_sigmoid, [](double y) { return y * (1.0 - y); });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  const Shape sa = a.shape(), sb = b.shape();
  require(sa.rows == sb.rows, "concat_cols",
          "row counts differ: " + to_string(sa) + " | " + to_string(sb));
  const std::size_t rows = sa.rows, ca = sa.cols, cb = sb.cols, c = ca + cb;
  std::vector<double> out(rows * c);
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < rows; ++i) {
    std::copy_n(&av[i * ca], ca, &out[i * c]);
    std::copy_n(&bv[i * cb], cb, &out[i * c + ca]);
  }
  NodePtr an = grad_target(a), bn = grad_target(b);
  return emit("concat_cols", {rows, c}, std::move(out), {&a, &b},
              [an, bn, rows, ca, cb, c](const std::vector<double>& g) {
                if (an) {
                  auto& ga = an->grad_buffer();
                  for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < ca; ++j) ga[i * ca + j] += g[i * c + j];
                }
                if (bn) {
                  auto& gb = bn->grad_buffer();
                  for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < cb; ++j) gb[i * cb + j] += g[i * c + ca + j];
                }
              });
}

Tensor repeat_rows(const Tensor& a, std::size_t times) {
  require(a.shape().rows == 1, "repeat_rows", "expects a row, got " + to_string(a.shape()));
  const std::size_t n = a.shape().cols;
  std::vector<double> out(times * n);
  const auto av = a.values();
  for (std::size_t i = 0; i < times; ++i) std::copy(av.begin(), av.end(), out.begin() + i * n);
  NodePtr an = a.node_ptr();
  return emit("repeat_rows", {times, n}, std::move(out), {&a},
              [an, times, n](const std::vector<double>& g) {
                auto& ga = an->grad_buffer();
                for (std::size_t i = 0; i < times; ++i)
                  for (std::size_t j = 0; j < n; ++j) ga[j] += g[i * n + j];
              });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices) {
  const Shape s = table.shape();
  const std::size_t d = s.cols;
  std::vector<double> out(indices.size() * d);
  const auto tv = table.values();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < s.rows, "gather_rows",
            "index " + std::to_string(indices[i]) + " outside table " + to_string(s));
    std::copy_n(&tv[indices[i] * d], d, &out[i * d]);
  }
  NodePtr tn = table.node_ptr();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return emit("gather_rows", {indices.size(), d}, std::move(out), {&table},
              [tn, idx = std::move(idx), d](const std::vector<double>& g) {
                auto& gt = tn->grad_buffer();
                for (std::size_t i = 0; i < idx.size(); ++i)
                  for (std::size_t j = 0; j < d; ++j) gt[idx[i] * d + j] += g[i * d + j];
              });
}

Tensor slice_row(const Tensor& a, std::size_t r) {
  const Shape s = a.shape();
  require(r < s.rows, "slice_row", "row " + std::to_string(r) + " outside " + to_string(s));
  const auto av = a.values();
  std::vector<double> out(av.begin() + r * s.cols, av.begin() + (r + 1) * s.cols);
  NodePtr an = a.node_ptr();
  const std::size_t offset = r * s.cols;
  return emit("slice_row", {1, s.cols}, std::move(out), {&a},
              [an, offset](const std::vector<double>& g) {
                auto& ga = an->grad_buffer();
                for (std::size_t j = 0; j < g.size(); ++j) ga[offset + j] += g[j];
              });
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  NodePtr an = a.node_ptr();
  return emit("sum", {1, 1}, {total}, {&a}, [an](const std::vector<double>& g) {
    auto& ga = an->grad_buffer();
    for (double& x : ga) x += g[0];
  });
}

Tensor mean(const Tensor& a) {
  require(a.size() > 0, "mean", "empty tensor");
  return affine(sum(a), 1.0 / static_cast<double>(a.size()), 0.0);
}

Tensor add_all(std::span<const Tensor> terms) {
  if (terms.empty()) return Tensor::scalar(0.0);
  double total = 0.0;
  bool tracked = false;
  std::vector<NodePtr> nodes;
  nodes.reserve(terms.size());
  for (const auto& t : terms) {
    require(t.size() == 1, "add_all", "term is not a scalar: " + to_string(t.shape()));
    total += t.item();
    tracked = tracked || t.requires_grad();
    nodes.push_back(grad_target(t));
  }
  Tensor out = Tensor::scalar(total);
  if (!std::isfinite(total)) throw NumericError("add_all: produced a non-finite value");
  Tape* tape = Tape::active();
  if (tape != nullptr && tracked) {
    tape->record(out, [nodes = std::move(nodes)](const std::vector<double>& g) {
      for (const auto& n : nodes)
        if (n) n->grad_buffer()[0] += g[0];
    });
  }
  return out;
}

Tensor masked_softmax(const Tensor& scores, const std::vector<bool>& mask) {
  const std::size_t k = scores.size();
  require(mask.size() == k, "masked_softmax",
          "mask length " + std::to_string(mask.size()) + " vs " + std::to_string(k) + " scores");
  const auto sv = scores.values();
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i)
    if (mask[i]) top = std::max(top, sv[i]);
  if (!std::isfinite(top)) {
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
      throw ConfigError("masked_softmax: every entry is masked");
    }
    throw NumericError("masked_softmax: non-finite score");
  }
  std::vector<double> out(k, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!mask[i]) continue;
    out[i] = std::exp(sv[i] - top);
    z += out[i];
  }
  for (double& v : out) v /= z;
  NodePtr sn = scores.node_ptr();
  std::vector<double> saved = out;
  return emit("masked_softmax", scores.shape(), std::move(out), {&scores},
              [sn, saved = std::move(saved)](const std::vector<double>& g) {
                double dot = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) dot += saved[i] * g[i];
                auto& gs = sn->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) gs[i] += saved[i] * (g[i] - dot);
              });
}

Tensor weighted_sum(const Tensor& rows, const Tensor& weights) {
  const Shape s = rows.shape();
  require(weights.size() == s.rows, "weighted_sum",
          std::to_string(weights.size()) + " weights for " + to_string(s) + " rows");
  const std::size_t k = s.rows, d = s.cols;
  const auto rv = rows.values(), wv = weights.values();
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    if (wv[i] == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) out[j] += wv[i] * rv[i * d + j];
  }
  NodePtr rn = rows.node_ptr(), wn = weights.node_ptr();
  return emit("weighted_sum", {1, d}, std::move(out), {&rows, &weights},
              [rn, wn, k, d](const std::vector<double>& g) {
                if (rn->requires_grad) {
                  auto& gr = rn->grad_buffer();
                  for (std::size_t i = 0; i < k; ++i) {
                    const double w = wn->value[i];
                    if (w == 0.0) continue;
                    for (std::size_t j = 0; j < d; ++j) gr[i * d + j] += w * g[j];
                  }
                }
                if (wn->requires_grad) {
                  auto& gw = wn->grad_buffer();
                  for (std::size_t i = 0; i < k; ++i) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < d; ++j) acc += rn->value[i * d + j] * g[j];
                    gw[i] += acc;
                  }
                }
              });
}

Tensor sigmoid_bce_loss(const Tensor& logits, const Tensor& targets) {
  require(logits.size() == targets.size(), "sigmoid_bce_loss",
          "logits " + to_string(logits.shape()) + " vs targets " + to_string(targets.shape()));
  const auto xv = logits.values(), yv = targets.values();
  double total = 0.0;
  std::vector<double> dx(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double x = xv[i], y = yv[i];
    total += std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
    dx[i] = stable_sigmoid(x) - y;
  }
  NodePtr xn = logits.node_ptr();
  return emit("sigmoid_bce_loss", {1, 1}, {total}, {&logits},
              [xn, dx = std::move(dx)](const std::vector<double>& g) {
                auto& gx = xn->grad_buffer();
                for (std::size_t i = 0; i < dx.size(); ++i) gx[i] += g[0] * dx[i];
              });
}

}  // namespace attreg::diff
