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

#include "mvrisk/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mvrisk::num {

GradCheckResult grad_check(const ScalarFunction& fn, std::span<const Tensor> params,
                           const GradCheckOptions& options) {
  std::vector<Tensor> work(params.begin(), params.end());

  auto evaluate = [&](bool with_grad, std::vector<Tensor>* grads) {
    Graph g;
    std::vector<Var> leaves;
    leaves.reserve(work.size());
    for (const Tensor& t : work) leaves.push_back(g.parameter(t));
    Var out = fn(g, leaves);
    const double value = g.value(out)[0];
    if (with_grad) {
      g.backward(out);
      grads->clear();
      for (Var v : leaves) grads->push_back(g.grad(v));
    }
    return value;
  };

  std::vector<Tensor> analytic;
  evaluate(true, &analytic);

  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t p = 0; p < work.size(); ++p) {
    std::vector<std::size_t> entries(work[p].size());
    std::iota(entries.begin(), entries.end(), std::size_t{0});
    if (options.max_entries_per_tensor > 0 && entries.size() > options.max_entries_per_tensor) {
      std::shuffle(entries.begin(), entries.end(), rng);
      entries.resize(options.max_entries_per_tensor);
      std::sort(entries.begin(), entries.end());
    }
    for (std::size_t i : entries) {
      const double saved = work[p][i];
      auto central = [&](double h) {
        work[p][i] = saved + h;
        const double up = evaluate(false, nullptr);
        work[p][i] = saved - h;
        const double down = evaluate(false, nullptr);
        work[p][i] = saved;
        return (up - down) / (2.0 * h);
      };
      double numeric = 0.0;
      if (options.richardson) {
        for (double h = options.epsilon;; h /= 10.0) {
          const double d1 = central(h), d2 = central(h / 2.0), d4 = central(h / 4.0);
          const double r1 = (4.0 * d2 - d1) / 3.0, r2 = (4.0 * d4 - d2) / 3.0;
          numeric = r2;
          if (std::fabs(r1 - r2) <= 1e-5 * std::max(std::fabs(r1), std::fabs(r2)) + 4e-15 / h || h < 1e-6) break;
        }
      } else {
        numeric = central(options.epsilon);
      }
      const double a = analytic[p][i];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      const double err = std::fabs(a - numeric) / denom;
      ++result.entries_checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_tensor = p;
        result.worst_entry = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

namespace {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = dist(rng);
  return t;
}

// Keeps values away from kinks so central differences never straddle one.
Tensor random_away_from_zero(Shape shape, std::mt19937_64& rng) {
  Tensor t = random_tensor(std::move(shape), rng, 0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (double& x : t.data()) {
    if (sign(rng)) x = -x;
  }
  return t;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Reduces an arbitrary-shape output to a scalar with fixed random weights so
// every output element contributes a distinct cotangent.
Var weighted_sum(Graph& g, Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Var w = g.input(random_tensor(g.value(out).shape(), rng));
  return sum(g, multiply(g, out, w));
}

}  // namespace

std::vector<NamedCheck> primitive_grad_checks(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::uint64_t wseed = rng();
  std::vector<NamedCheck> out;
  auto run = [&](std::string name, std::vector<Tensor> params, auto body) {
    ScalarFunction f = [&, body](Graph& g, std::span<const Var> p) {
      return weighted_sum(g, body(g, p), wseed);
    };
    out.push_back({std::move(name), grad_check(f, params).max_rel_error});
  };

  {
    const std::size_t m = pick(rng, 1, 6), k = pick(rng, 1, 6), n = pick(rng, 1, 6);
    run("matmul", {random_tensor({m, k}, rng), random_tensor({k, n}, rng)},
        [](Graph& g, std::span<const Var> p) { return matmul(g, p[0], p[1]); });
  }
  {
    const std::size_t m = pick(rng, 1, 6), n = pick(rng, 1, 6);
    run("transpose", {random_tensor({m, n}, rng)},
        [](Graph& g, std::span<const Var> p) { return transpose(g, p[0]); });
  }
  {
    const std::size_t b = pick(rng, 1, 4), m = pick(rng, 1, 5), k = pick(rng, 1, 5), n = pick(rng, 1, 5);
    run("bmm", {random_tensor({b, m, k}, rng), random_tensor({b, k, n}, rng)},
        [](Graph& g, std::span<const Var> p) { return bmm(g, p[0], p[1]); });
  }
  {
    const std::size_t m = pick(rng, 1, 5), n = pick(rng, 1, 5);
    run("reshape", {random_tensor({m, n}, rng)},
        [m, n](Graph& g, std::span<const Var> p) { return reshape(g, p[0], {n * m}); });
  }
  const Shape ew{pick(rng, 1, 5), pick(rng, 1, 5)};
  run("add", {random_tensor(ew, rng), random_tensor(ew, rng)},
      [](Graph& g, std::span<const Var> p) { return add(g, p[0], p[1]); });
  run("subtract", {random_tensor(ew, rng), random_tensor(ew, rng)},
      [](Graph& g, std::span<const Var> p) { return subtract(g, p[0], p[1]); });
  run("multiply", {random_tensor(ew, rng), random_tensor(ew, rng)},
      [](Graph& g, std::span<const Var> p) { return multiply(g, p[0], p[1]); });
  run("scale", {random_tensor(ew, rng)},
      [](Graph& g, std::span<const Var> p) { return scale(g, p[0], -1.7); });
  run("add_bias", {random_tensor(ew, rng), random_tensor({ew[1]}, rng)},
      [](Graph& g, std::span<const Var> p) { return add_bias(g, p[0], p[1]); });
  run("mul_row", {random_tensor(ew, rng), random_tensor({ew[1]}, rng)},
      [](Graph& g, std::span<const Var> p) { return mul_row(g, p[0], p[1]); });
  {
    const std::size_t rows = pick(rng, 1, 4);
    run("concat",
        {random_tensor({rows, pick(rng, 1, 4)}, rng), random_tensor({rows, pick(rng, 1, 4)}, rng),
         random_tensor({rows, pick(rng, 1, 4)}, rng)},
        [](Graph& g, std::span<const Var> p) { return concat(g, p); });
  }
  run("exp", {random_tensor(ew, rng)}, [](Graph& g, std::span<const Var> p) { return exp(g, p[0]); });
  run("sigmoid", {random_tensor(ew, rng, -4, 4)},
      [](Graph& g, std::span<const Var> p) { return sigmoid(g, p[0]); });
  run("relu", {random_away_from_zero(ew, rng)},
      [](Graph& g, std::span<const Var> p) { return relu(g, p[0]); });
  run("softplus", {random_tensor(ew, rng, -4, 4)},
      [](Graph& g, std::span<const Var> p) { return softplus(g, p[0]); });
  run("abs", {random_away_from_zero(ew, rng)},
      [](Graph& g, std::span<const Var> p) { return abs(g, p[0]); });
  {
    const Shape s3{pick(rng, 1, 4), pick(rng, 2, 5), pick(rng, 1, 4)};
    const std::size_t axis = pick(rng, 0, 2);
    Shape sm_shape = s3;
    sm_shape[axis] = std::max<std::size_t>(sm_shape[axis], 2);
    run("softmax", {random_tensor(sm_shape, rng, -2, 2)},
        [axis](Graph& g, std::span<const Var> p) { return softmax(g, p[0], axis); });
    const std::size_t ln_axis = pick(rng, 0, 2);
    Shape ln_shape = s3;
    ln_shape[ln_axis] = std::max<std::size_t>(ln_shape[ln_axis], 3);
    run("layer_norm", {random_tensor(ln_shape, rng, -2, 2)},
        [ln_axis](Graph& g, std::span<const Var> p) { return layer_norm(g, p[0], ln_axis); });
  }
  {
    const std::uint64_t mask_seed = rng();
    run("dropout", {random_tensor(ew, rng)}, [mask_seed](Graph& g, std::span<const Var> p) {
      std::mt19937_64 mask_rng(mask_seed);
      return dropout(g, p[0], 0.3, DropoutMode::kTrain, mask_rng);
    });
  }
  run("sum", {random_tensor(ew, rng)}, [](Graph& g, std::span<const Var> p) { return sum(g, p[0]); });
  {
    const std::size_t n = pick(rng, 1, 8);
    run("rmse", {random_tensor({n, 1}, rng), random_tensor({n, 1}, rng)},
        [](Graph& g, std::span<const Var> p) { return rmse(g, p[0], p[1]); });
  }
  {
    const std::size_t n = pick(rng, 3, 8);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(pick(rng, 1, n));
    run("scatter", {random_tensor({idx.size()}, rng)},
        [idx, n](Graph& g, std::span<const Var> p) { return scatter(g, p[0], idx, n); });
  }
  {
    const std::size_t b = pick(rng, 1, 4), v = pick(rng, 1, 5), e = pick(rng, 1, 4);
    run("token_embed", {random_tensor({b, v}, rng), random_tensor({v, e}, rng), random_tensor({v, e}, rng)},
        [](Graph& g, std::span<const Var> p) { return token_embed(g, p[0], p[1], p[2]); });
  }
  return out;
}

}  // namespace mvrisk::num
