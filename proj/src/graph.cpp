// Copyright 2026 The mvrisk Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mvrisk/graph.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "mvrisk/error.hpp"

namespace mvrisk::num {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  fail(ErrorCode::kShape, std::string(op) + ": incompatible shapes " + shape_string(a) +
                              " and " + shape_string(b));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

MapConstMat as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return MapConstMat(t.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MapMat as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MapMat(t.raw(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

// Element-wise unary op with derivative expressed through input and output.
template <typename F, typename D>
Var unary(Graph& g, Var a, F forward, D derivative) {
  const Tensor& x = g.value(a);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  return g.record({a}, std::move(y), [derivative](const BackwardContext& ctx) {
    Tensor* gx = ctx.input_grads[0];
    if (!gx) return;
    const Tensor& x = *ctx.inputs[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
      (*gx)[i] += ctx.output_grad[i] * derivative(x[i], ctx.output[i]);
    }
  });
}

struct AxisSplit {
  std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    fail(ErrorCode::kShape, std::string(op) + ": axis " + std::to_string(axis) +
                                " out of range for " + shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

// ---- Graph ----------------------------------------------------------------

Var Graph::input(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, false, false});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::parameter(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, true, false});
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::record(std::vector<Var> inputs, Tensor value, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (Var v : inputs) {
    if (v.id >= nodes_.size()) fail(ErrorCode::kUsage, "graph input refers to an unknown node");
    n.inputs.push_back(v.id);
    n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  if (!n.backward) n.requires_grad = false;
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Graph::Node& Graph::node(Var v) const {
  if (v.id >= nodes_.size()) fail(ErrorCode::kUsage, "unknown graph node");
  return nodes_[v.id];
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.has_grad) return n.grad;
  return Tensor(n.value.shape(), 0.0);
}

void Graph::backward(Var output) {
  const Node& out = node(output);
  if (out.value.size() != 1) {
    fail(ErrorCode::kUsage, "backward requires a scalar output, got shape " +
                                shape_string(out.value.shape()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  Node& root = nodes_[output.id];
  root.grad = Tensor(root.value.shape(), 1.0);
  root.has_grad = true;

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    in_values.clear();
    in_grads.clear();
    for (std::uint32_t id : n.inputs) {
      Node& in = nodes_[id];
      in_values.push_back(&in.value);
      if (in.requires_grad) {
        if (!in.has_grad) {
          in.grad = Tensor(in.value.shape(), 0.0);
          in.has_grad = true;
        }
        in_grads.push_back(&in.grad);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    n.backward(BackwardContext{in_values, in_grads, n.value, n.grad});
  }
}

// ---- linear algebra -------------------------------------------------------

Var matmul(Graph& g, Var a, Var b) {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  if (A.rank() != 2 || B.rank() != 2 || A.dim(1) != B.dim(0)) shape_error("matmul", A.shape(), B.shape());
  const std::size_t m = A.dim(0), k = A.dim(1), n = B.dim(1);
  Tensor C({m, n});
  as_matrix(C, m, n).noalias() = as_matrix(A, m, k) * as_matrix(B, k, n);
  return g.record({a, b}, std::move(C), [m, k, n](const BackwardContext& ctx) {
    auto dC = as_matrix(ctx.output_grad, m, n);
    if (Tensor* gA = ctx.input_grads[0]) {
      as_matrix(*gA, m, k).noalias() += dC * as_matrix(*ctx.inputs[1], k, n).transpose();
    }
    if (Tensor* gB = ctx.input_grads[1]) {
      as_matrix(*gB, k, n).noalias() += as_matrix(*ctx.inputs[0], m, k).transpose() * dC;
    }
  });
}

Var transpose(Graph& g, Var a) {
  const Tensor& A = g.value(a);
  if (A.rank() != 2) fail(ErrorCode::kShape, "transpose: expected rank 2, got " + shape_string(A.shape()));
  const std::size_t m = A.dim(0), n = A.dim(1);
  Tensor T({n, m});
  as_matrix(T, n, m) = as_matrix(A, m, n).transpose();
  return g.record({a}, std::move(T), [m, n](const BackwardContext& ctx) {
    if (Tensor* gA = ctx.input_grads[0]) {
      as_matrix(*gA, m, n) += as_matrix(ctx.output_grad, n, m).transpose();
    }
  });
}

Var bmm(Graph& g, Var a, Var b) {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  if (A.rank() != 3 || B.rank() != 3 || A.dim(0) != B.dim(0) || A.dim(2) != B.dim(1)) {
    shape_error("bmm", A.shape(), B.shape());
  }
  const std::size_t batch = A.dim(0), m = A.dim(1), k = A.dim(2), n = B.dim(2);
  Tensor C({batch, m, n});
  for (std::size_t i = 0; i < batch; ++i) {
    MapMat(C.raw() + i * m * n, m, n).noalias() =
        MapConstMat(A.raw() + i * m * k, m, k) * MapConstMat(B.raw() + i * k * n, k, n);
  }
  return g.record({a, b}, std::move(C), [batch, m, k, n](const BackwardContext& ctx) {
    const Tensor& A = *ctx.inputs[0];
    const Tensor& B = *ctx.inputs[1];
    for (std::size_t i = 0; i < batch; ++i) {
      MapConstMat dC(ctx.output_grad.raw() + i * m * n, m, n);
      if (Tensor* gA = ctx.input_grads[0]) {
        MapMat(gA->raw() + i * m * k, m, k).noalias() +=
            dC * MapConstMat(B.raw() + i * k * n, k, n).transpose();
      }
      if (Tensor* gB = ctx.input_grads[1]) {
        MapMat(gB->raw() + i * k * n, k, n).noalias() +=
            MapConstMat(A.raw() + i * m * k, m, k).transpose() * dC;
      }
    }
  });
}

Var reshape(Graph& g, Var a, Shape shape) {
  Tensor out = g.value(a).reshaped(std::move(shape));
  return g.record({a}, std::move(out), [](const BackwardContext& ctx) {
    if (Tensor* gA = ctx.input_grads[0]) {
      for (std::size_t i = 0; i < gA->size(); ++i) (*gA)[i] += ctx.output_grad[i];
    }
  });
}

// ---- elementwise ----------------------------------------------------------

Var add(Graph& g, Var a, Var b) {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  require_same("add", A, B);
  Tensor C(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] + B[i];
  return g.record({a, b}, std::move(C), [](const BackwardContext& ctx) {
    for (Tensor* gi : ctx.input_grads) {
      if (gi) gi->add_inplace(ctx.output_grad);
    }
  });
}

Var subtract(Graph& g, Var a, Var b) {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  require_same("subtract", A, B);
  Tensor C(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] - B[i];
  return g.record({a, b}, std::move(C), [](const BackwardContext& ctx) {
    if (Tensor* gA = ctx.input_grads[0]) gA->add_inplace(ctx.output_grad);
    if (Tensor* gB = ctx.input_grads[1]) {
      for (std::size_t i = 0; i < gB->size(); ++i) (*gB)[i] -= ctx.output_grad[i];
    }
  });
}

Var multiply(Graph& g, Var a, Var b) {
  const Tensor& A = g.value(a);
  const Tensor& B = g.value(b);
  require_same("multiply", A, B);
  Tensor C(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] * B[i];
  return g.record({a, b}, std::move(C), [](const BackwardContext& ctx) {
    const Tensor& A = *ctx.inputs[0];
    const Tensor& B = *ctx.inputs[1];
    if (Tensor* gA = ctx.input_grads[0]) {
      for (std::size_t i = 0; i < A.size(); ++i) (*gA)[i] += ctx.output_grad[i] * B[i];
    }
    if (Tensor* gB = ctx.input_grads[1]) {
      for (std::size_t i = 0; i < B.size(); ++i) (*gB)[i] += ctx.output_grad[i] * A[i];
    }
  });
}

Var scale(Graph& g, Var a, double factor) {
  const Tensor& A = g.value(a);
  Tensor C(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) C[i] = A[i] * factor;
  return g.record({a}, std::move(C), [factor](const BackwardContext& ctx) {
    if (Tensor* gA = ctx.input_grads[0]) {
      for (std::size_t i = 0; i < gA->size(); ++i) (*gA)[i] += ctx.output_grad[i] * factor;
    }
  });
}

Var add_bias(Graph& g, Var a, Var bias) {
  const Tensor& A = g.value(a);
  const Tensor& b = g.value(bias);
  const std::size_t n = A.shape().back();
  if (b.rank() != 1 || b.dim(0) != n) shape_error("add_bias", A.shape(), b.shape());
  Tensor C(A.shape());
  const std::size_t rows = A.size() / n;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) C[r * n + j] = A[r * n + j] + b[j];
  }
  return g.record({a, bias}, std::move(C), [rows, n](const BackwardContext& ctx) {
    if (Tensor* gA = ctx.input_grads[0]) gA->add_inplace(ctx.output_grad);
    if (Tensor* gb = ctx.input_grads[1]) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n; ++j) (*gb)[j] += ctx.output_grad[r * n + j];
      }
    }
  });
}

Var mul_row(Graph& g, Var a, Var row) {
  const Tensor& A = g.value(a);
  const Tensor& v = g.value(row);
  const std::size_t n = A.shape().back();
  if (v.rank() != 1 || v.dim(0) != n) shape_error("mul_row", A.shape(), v.shape());
  Tensor C(A.shape());
  const std::size_t rows = A.size() / n;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) C[r * n + j] = A[r * n + j] * v[j];
  }
  return g.record({a, row}, std::move(C), [rows, n](const BackwardContext& ctx) {
    const Tensor& A = *ctx.inputs[0];
    const Tensor& v = *ctx.inputs[1];
    Tensor* gA = ctx.input_grads[0];
    Tensor* gv = ctx.input_grads[1];
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < n; ++j) {
        const double go = ctx.output_grad[r * n + j];
        if (gA) (*gA)[r * n + j] += go * v[j];
        if (gv) (*gv)[j] += go * A[r * n + j];
      }
    }
  });
}

Var concat(Graph& g, std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorCode::kShape, "concat: no inputs");
  Shape lead = g.value(parts[0]).shape();
  lead.pop_back();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const Tensor& t = g.value(p);
    Shape l = t.shape();
    l.pop_back();
    if (l != lead) shape_error("concat", g.value(parts[0]).shape(), t.shape());
    widths.push_back(t.shape().back());
    total += widths.back();
  }
  const std::size_t rows = shape_size(lead.empty() ? Shape{1} : lead);
  Shape out_shape = lead;
  out_shape.push_back(total);
  Tensor C(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& t = g.value(parts[k]);
    const std::size_t w = widths[k];
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(t.raw() + r * w, w, C.raw() + r * total + offset);
    }
    offset += w;
  }
  return g.record(std::vector<Var>(parts.begin(), parts.end()), std::move(C),
                  [rows, total, widths](const BackwardContext& ctx) {
                    std::size_t offset = 0;
                    for (std::size_t k = 0; k < widths.size(); ++k) {
                      const std::size_t w = widths[k];
                      if (Tensor* gk = ctx.input_grads[k]) {
                        for (std::size_t r = 0; r < rows; ++r) {
                          const double* src = ctx.output_grad.raw() + r * total + offset;
                          double* dst = gk->raw() + r * w;
                          for (std::size_t j = 0; j < w; ++j) dst[j] += src[j];
                        }
                      }
                      offset += w;
                    }
                  });
}

Var exp(Graph& g, Var a) {
  return unary(g, a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Var sigmoid(Graph& g, Var a) {
  return unary(
      g, a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Graph& g, Var a) {
  return unary(g, a, [](double x) { return x > 0 || std::isnan(x) ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var softplus(Graph& g, Var a) {
  return unary(
      g, a, [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Var abs(Graph& g, Var a) {
  return unary(g, a, [](double x) { return std::fabs(x); },
               [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

// ---- normalization --------------------------------------------------------

Var softmax(Graph& g, Var a, std::size_t axis) {
  const Tensor& X = g.value(a);
  const AxisSplit s = split_axis(X.shape(), axis, "softmax");
  Tensor Y(X.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mx = X[base];
      for (std::size_t i = 1; i < s.n; ++i) mx = std::max(mx, X[base + i * s.inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < s.n; ++i) {
        const double e = std::exp(X[base + i * s.inner] - mx);
        Y[base + i * s.inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < s.n; ++i) Y[base + i * s.inner] /= total;
    }
  }
  return g.record({a}, std::move(Y), [s](const BackwardContext& ctx) {
    Tensor* gX = ctx.input_grads[0];
    if (!gX) return;
    const Tensor& Y = ctx.output;
    const Tensor& dY = ctx.output_grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.n * s.inner + in;
        double dot = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) {
          dot += dY[base + i * s.inner] * Y[base + i * s.inner];
        }
        for (std::size_t i = 0; i < s.n; ++i) {
          const std::size_t k = base + i * s.inner;
          (*gX)[k] += Y[k] * (dY[k] - dot);
        }
      }
    }
  });
}

Var layer_norm(Graph& g, Var a, std::size_t axis, double eps) {
  const Tensor& X = g.value(a);
  const AxisSplit s = split_axis(X.shape(), axis, "layer_norm");
  Tensor Y(X.shape());
  std::vector<double> inv_std(s.outer * s.inner);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.n * s.inner + in;
      double mean = 0.0;
      for (std::size_t i = 0; i < s.n; ++i) mean += X[base + i * s.inner];
      mean /= static_cast<double>(s.n);
      double var = 0.0;
      for (std::size_t i = 0; i < s.n; ++i) {
        const double d = X[base + i * s.inner] - mean;
        var += d * d;
      }
      var /= static_cast<double>(s.n);
      const double is = 1.0 / std::sqrt(var + eps);
      inv_std[o * s.inner + in] = is;
      for (std::size_t i = 0; i < s.n; ++i) {
        Y[base + i * s.inner] = (X[base + i * s.inner] - mean) * is;
      }
    }
  }
  return g.record({a}, std::move(Y), [s, inv_std = std::move(inv_std)](const BackwardContext& ctx) {
    Tensor* gX = ctx.input_grads[0];
    if (!gX) return;
    const Tensor& Y = ctx.output;
    const Tensor& dY = ctx.output_grad;
    const double n = static_cast<double>(s.n);
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.n * s.inner + in;
        double mean_dy = 0.0, mean_dy_y = 0.0;
        for (std::size_t i = 0; i < s.n; ++i) {
          const std::size_t k = base + i * s.inner;
          mean_dy += dY[k];
          mean_dy_y += dY[k] * Y[k];
        }
        mean_dy /= n;
        mean_dy_y /= n;
        const double is = inv_std[o * s.inner + in];
        for (std::size_t i = 0; i < s.n; ++i) {
          const std::size_t k = base + i * s.inner;
          (*gX)[k] += is * (dY[k] - mean_dy - Y[k] * mean_dy_y);
        }
      }
    }
  });
}

Var dropout(Graph& g, Var a, double rate, DropoutMode mode, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    fail(ErrorCode::kUsage, "dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == DropoutMode::kEval || rate == 0.0) return a;
  const Tensor& X = g.value(a);
  Tensor mask(X.shape());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    mask[i] = u >= rate ? keep_scale : 0.0;
  }
  Tensor Y(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) Y[i] = X[i] * mask[i];
  return g.record({a}, std::move(Y), [mask = std::move(mask)](const BackwardContext& ctx) {
    if (Tensor* gX = ctx.input_grads[0]) {
      for (std::size_t i = 0; i < gX->size(); ++i) (*gX)[i] += ctx.output_grad[i] * mask[i];
    }
  });
}

// ---- reductions -----------------------------------------------------------

Var sum(Graph& g, Var a) {
  const Tensor& X = g.value(a);
  double total = 0.0;
  for (double x : X.data()) total += x;
  return g.record({a}, Tensor::scalar(total), [](const BackwardContext& ctx) {
    if (Tensor* gX = ctx.input_grads[0]) {
      const double go = ctx.output_grad[0];
      for (std::size_t i = 0; i < gX->size(); ++i) (*gX)[i] += go;
    }
  });
}

Var rmse(Graph& g, Var pred, Var target) {
  const Tensor& P = g.value(pred);
  const Tensor& T = g.value(target);
  require_same("rmse", P, T);
  double ss = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double d = P[i] - T[i];
    ss += d * d;
  }
  const double n = static_cast<double>(P.size());
  const double value = std::sqrt(ss / n);
  return g.record({pred, target}, Tensor::scalar(value), [n](const BackwardContext& ctx) {
    const double r = ctx.output[0];
    if (r == 0.0) return;
    const Tensor& P = *ctx.inputs[0];
    const Tensor& T = *ctx.inputs[1];
    const double factor = ctx.output_grad[0] / (n * r);
    for (std::size_t i = 0; i < P.size(); ++i) {
      const double d = (P[i] - T[i]) * factor;
      if (ctx.input_grads[0]) (*ctx.input_grads[0])[i] += d;
      if (ctx.input_grads[1]) (*ctx.input_grads[1])[i] -= d;
    }
  });
}

// ---- indexing / embedding -------------------------------------------------

Var scatter(Graph& g, Var v, std::span<const std::size_t> idx, std::size_t n) {
  const Tensor& V = g.value(v);
  if (V.rank() != 1 || V.dim(0) != idx.size()) {
    fail(ErrorCode::kShape, "scatter: values " + shape_string(V.shape()) + " vs " +
                                std::to_string(idx.size()) + " indices");
  }
  Tensor out({n}, 0.0);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    if (idx[k] >= n) fail(ErrorCode::kShape, "scatter: index out of range");
    out[idx[k]] += V[k];
  }
  std::vector<std::size_t> positions(idx.begin(), idx.end());
  return g.record({v}, std::move(out), [positions = std::move(positions)](const BackwardContext& ctx) {
    if (Tensor* gV = ctx.input_grads[0]) {
      for (std::size_t k = 0; k < positions.size(); ++k) (*gV)[k] += ctx.output_grad[positions[k]];
    }
  });
}

Var token_embed(Graph& g, Var x, Var scale_emb, Var identity_emb) {
  const Tensor& X = g.value(x);
  const Tensor& S = g.value(scale_emb);
  const Tensor& I = g.value(identity_emb);
  if (X.rank() != 2 || S.rank() != 2 || S.dim(0) != X.dim(1)) shape_error("token_embed", X.shape(), S.shape());
  require_same("token_embed", S, I);
  const std::size_t batch = X.dim(0), vars = X.dim(1), width = S.dim(1);
  Tensor T({batch, vars, width});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t v = 0; v < vars; ++v) {
      const double xv = X[b * vars + v];
      double* out = T.raw() + (b * vars + v) * width;
      const double* s = S.raw() + v * width;
      const double* id = I.raw() + v * width;
      for (std::size_t e = 0; e < width; ++e) out[e] = xv * s[e] + id[e];
    }
  }
  return g.record({x, scale_emb, identity_emb}, std::move(T),
                  [batch, vars, width](const BackwardContext& ctx) {
                    const Tensor& X = *ctx.inputs[0];
                    const Tensor& S = *ctx.inputs[1];
                    Tensor* gX = ctx.input_grads[0];
                    Tensor* gS = ctx.input_grads[1];
                    Tensor* gI = ctx.input_grads[2];
                    for (std::size_t b = 0; b < batch; ++b) {
                      for (std::size_t v = 0; v < vars; ++v) {
                        const double* dT = ctx.output_grad.raw() + (b * vars + v) * width;
                        const double* s = S.raw() + v * width;
                        const double xv = X[b * vars + v];
                        double acc = 0.0;
                        for (std::size_t e = 0; e < width; ++e) {
                          acc += dT[e] * s[e];
                          if (gS) (*gS)[v * width + e] += dT[e] * xv;
                          if (gI) (*gI)[v * width + e] += dT[e];
                        }
                        if (gX) (*gX)[b * vars + v] += acc;
                      }
                    }
                  });
}

}  // namespace mvrisk::num
