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


#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "mvrisk/error.hpp"
#include "mvrisk/gradcheck.hpp"
#include "mvrisk/graph.hpp"

namespace mvrisk::num {
namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = d(rng);
  return t;
}

TEST(Graph, IdentityGradientIsOne) {
  Graph g;
  Var x = g.parameter(Tensor::scalar(3.5));
  g.backward(x);
  EXPECT_EQ(g.grad(x)[0], 1.0);
}

TEST(Graph, ProductRule) {
  Graph g;
  Var x = g.parameter(Tensor::scalar(2.0));
  Var y = g.parameter(Tensor::scalar(3.0));
  g.backward(multiply(g, x, y));
  EXPECT_EQ(g.grad(x)[0], 3.0);
  EXPECT_EQ(g.grad(y)[0], 2.0);
}

TEST(Graph, UnreachedLeafHasZeroGradient) {
  Graph g;
  Var x = g.parameter(Tensor::scalar(2.0));
  Var unused = g.parameter(Tensor::vector({1.0, 2.0}));
  g.backward(scale(g, x, 4.0));
  EXPECT_EQ(g.grad(unused)[0], 0.0);
  EXPECT_EQ(g.grad(unused)[1], 0.0);
}

TEST(Graph, NonScalarBackwardIsUsageError) {
  Graph g;
  Var x = g.parameter(Tensor::vector({1.0, 2.0}));
  try {
    g.backward(x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUsage);
  }
}

TEST(Graph, ShapeMismatchNamesBothShapes) {
  Graph g;
  Var a = g.input(Tensor({2, 3}));
  Var b = g.input(Tensor({4, 5}));
  try {
    matmul(g, a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
}

TEST(Graph, MatmulForward) {
  Graph g;
  Var a = g.input(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var b = g.input(Tensor::matrix(2, 1, {5, 6}));
  const Tensor& c = g.value(matmul(g, a, b));
  EXPECT_EQ(c[0], 17.0);
  EXPECT_EQ(c[1], 39.0);
}

TEST(Primitives, SoftmaxSumsToOne) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Graph g;
    Var x = g.input(random_tensor({3, 9}, rng, -20, 20));
    const Tensor& s = g.value(softmax(g, x, 1));
    for (std::size_t r = 0; r < 3; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 9; ++c) total += s.at(r, c);
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Primitives, SoftmaxShiftInvariant) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({2, 6}, rng, -5, 5);
    Tensor shifted = x;
    const double c = std::uniform_real_distribution<double>(-50, 50)(rng);
    for (double& v : shifted.data()) v += c;
    Graph g;
    const Tensor& a = g.value(softmax(g, g.input(x), 1));
    const Tensor& b = g.value(softmax(g, g.input(shifted), 1));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(Primitives, LayerNormMoments) {
  std::mt19937_64 rng(3);
  Graph g;
  Var x = g.input(random_tensor({4, 10}, rng, -3, 8));
  const Tensor& y = g.value(layer_norm(g, x, 1));
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 10; ++c) mean += y.at(r, c) / 10.0;
    for (std::size_t c = 0; c < 10; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean) / 10.0;
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
}

TEST(Primitives, DropoutEvalIsIdentity) {
  std::mt19937_64 rng(5);
  Tensor x = random_tensor({7, 3}, rng);
  Graph g;
  const Tensor& y = g.value(dropout(g, g.input(x), 0.4, DropoutMode::kEval, rng));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Primitives, DropoutTrainPreservesExpectation) {
  std::mt19937_64 rng(9);
  const double rate = 0.2;
  Graph g;
  Var x = g.input(Tensor({100000}, 1.0));
  const Tensor& y = g.value(dropout(g, x, rate, DropoutMode::kTrain, rng));
  std::size_t zeros = 0;
  double total = 0.0;
  for (double v : y.data()) {
    if (v == 0.0) {
      ++zeros;
    } else {
      EXPECT_DOUBLE_EQ(v, 1.0 / (1.0 - rate));
    }
    total += v;
  }
  EXPECT_NEAR(total / 100000.0, 1.0, 0.01);
  EXPECT_NEAR(static_cast<double>(zeros) / 100000.0, rate, 0.01);
}

TEST(Primitives, RmseForward) {
  Graph g;
  Var p = g.input(Tensor::matrix(4, 1, {1, 2, 3, 4}));
  Var t = g.input(Tensor::matrix(4, 1, {1, 2, 3, 0}));
  EXPECT_DOUBLE_EQ(g.value(rmse(g, p, t))[0], 2.0);
}

TEST(Primitives, TokenEmbedZeroValueGivesIdentity) {
  Graph g;
  Var x = g.input(Tensor::matrix(1, 2, {0.0, 2.0}));
  Var s = g.input(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var id = g.input(Tensor::matrix(2, 2, {-1, -2, 5, 6}));
  const Tensor& t = g.value(token_embed(g, x, s, id));
  ASSERT_EQ(t.shape(), (Shape{1, 2, 2}));
  EXPECT_EQ(t[0], -1.0);
  EXPECT_EQ(t[1], -2.0);
  EXPECT_EQ(t[2], 11.0);
  EXPECT_EQ(t[3], 14.0);
}

TEST(GradCheck, MatmulFixedShapes) {
  std::mt19937_64 rng(21);
  ScalarFunction f = [](Graph& g, std::span<const Var> p) { return sum(g, matmul(g, p[0], p[1])); };
  const std::vector<Tensor> params = {random_tensor({5, 4}, rng), random_tensor({4, 3}, rng)};
  EXPECT_LT(grad_check(f, params).max_rel_error, 1e-4);
}

TEST(GradCheck, LinearFunctionIsExact) {
  std::mt19937_64 rng(2);
  const Tensor w = random_tensor({6, 1}, rng);
  ScalarFunction f = [&](Graph& g, std::span<const Var> p) {
    return sum(g, matmul(g, p[0], g.input(w)));
  };
  const std::vector<Tensor> params = {random_tensor({3, 6}, rng)};
  EXPECT_LT(grad_check(f, params).max_rel_error, 1e-9);
}

// Sigmoid whose backward forgets the (1 - s) factor.
Var broken_sigmoid(Graph& g, Var a) {
  Tensor out = g.value(a);
  for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
  return g.record({a}, std::move(out), [](const BackwardContext& ctx) {
    if (!ctx.input_grads[0]) return;
    for (std::size_t i = 0; i < ctx.output.size(); ++i) {
      (*ctx.input_grads[0])[i] += ctx.output_grad[i] * ctx.output[i];
    }
  });
}

TEST(GradCheck, DetectsCorruptedSigmoidBackward) {
  std::mt19937_64 rng(4);
  const std::vector<Tensor> params = {random_tensor({4, 3}, rng, -3, 3)};
  ScalarFunction good = [](Graph& g, std::span<const Var> p) { return sum(g, sigmoid(g, p[0])); };
  ScalarFunction bad = [](Graph& g, std::span<const Var> p) { return sum(g, broken_sigmoid(g, p[0])); };
  EXPECT_LT(grad_check(good, params).max_rel_error, 1e-4);
  EXPECT_GT(grad_check(bad, params).max_rel_error, 1e-2);
}

class PrimitiveSeeds : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(PrimitiveSeeds, EveryPrimitivePasses) {
  const auto checks = primitive_grad_checks(GetParam());
  EXPECT_GE(checks.size(), 12u);
  for (const NamedCheck& c : checks) EXPECT_LT(c.max_rel_error, 1e-4) << c.name;
}

INSTANTIATE_TEST_SUITE_P(Seeds, PrimitiveSeeds, ::testing::Values(1, 2, 3, 4, 5, 6, 7, 8));

}  // namespace
}  // namespace mvrisk::num
