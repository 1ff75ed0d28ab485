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

#ifndef MVRISK_GRAPH_HPP_
#define MVRISK_GRAPH_HPP_

// Reverse-mode differentiation over a tape of primitive applications.
//
// A Graph records every primitive in execution order, so node ids are a
// topological order by construction. backward() walks the tape in reverse,
// accumulating vector-Jacobian products into input gradients. Nodes that do
// not depend on any parameter carry no backward closure.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "mvrisk/tensor.hpp"

namespace mvrisk::num {

struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const noexcept { return id != UINT32_MAX; }
};

enum class DropoutMode { kTrain, kEval };

// What a primitive's backward closure sees. input_grads[i] is null when
// input i does not require a gradient.
struct BackwardContext {
  std::span<const Tensor* const> inputs;
  std::span<Tensor* const> input_grads;
  const Tensor& output;
  const Tensor& output_grad;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  // Constant leaf; never receives a gradient.
  Var input(Tensor value);
  // Trainable leaf.
  Var parameter(Tensor value);

  // Records a primitive. `backward` may be empty for non-differentiable ops.
  Var record(std::vector<Var> inputs, Tensor value, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;

  // Gradient of the last backward() output wrt v; zeros if v did not reach it.
  Tensor grad(Var v) const;

  // Reverse sweep from a scalar (single-element) output.
  void backward(Var output);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool has_grad = false;
  };

  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

// ---- primitives -----------------------------------------------------------
// All primitives check shapes and throw Error(kShape) with both shapes in the
// message.

// [m,k] x [k,n] -> [m,n]
Var matmul(Graph& g, Var a, Var b);
// [m,n] -> [n,m]
Var transpose(Graph& g, Var a);
// [B,m,k] x [B,k,n] -> [B,m,n]
Var bmm(Graph& g, Var a, Var b);
Var reshape(Graph& g, Var a, Shape shape);

// Elementwise on equal shapes.
Var add(Graph& g, Var a, Var b);
Var subtract(Graph& g, Var a, Var b);
Var multiply(Graph& g, Var a, Var b);
Var scale(Graph& g, Var a, double factor);

// Row-vector broadcast over the last axis: a[..., n] (+|*) v[n].
Var add_bias(Graph& g, Var a, Var bias);
Var mul_row(Graph& g, Var a, Var row);

// Concatenate along the last axis; leading dimensions must agree.
Var concat(Graph& g, std::span<const Var> parts);

Var exp(Graph& g, Var a);
Var sigmoid(Graph& g, Var a);
Var relu(Graph& g, Var a);
Var softplus(Graph& g, Var a);
Var abs(Graph& g, Var a);

Var softmax(Graph& g, Var a, std::size_t axis);
// Normalizes to zero mean and unit variance along `axis` (no affine terms).
Var layer_norm(Graph& g, Var a, std::size_t axis, double eps = 1e-9);

// Train mode zeroes each element with probability `rate` and scales the
// survivors by 1/(1-rate). Eval mode returns `a` unchanged.
Var dropout(Graph& g, Var a, double rate, DropoutMode mode, std::mt19937_64& rng);

Var sum(Graph& g, Var a);
// sqrt(mean((pred - target)^2)); subgradient 0 at exactly zero error.
Var rmse(Graph& g, Var pred, Var target);

// v[k] placed at positions idx[k] of a zero vector of length n.
Var scatter(Graph& g, Var v, std::span<const std::size_t> idx, std::size_t n);

// x[B,V], scale[V,E], identity[V,E] -> tokens[B,V,E] with
// tokens[b,v,:] = x[b,v] * scale[v,:] + identity[v,:].
Var token_embed(Graph& g, Var x, Var scale, Var identity);

}  // namespace mvrisk::num

#endif  // MVRISK_GRAPH_HPP_
