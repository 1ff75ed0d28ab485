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

#ifndef MVRISK_GRADCHECK_HPP_
#define MVRISK_GRADCHECK_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mvrisk/graph.hpp"

namespace mvrisk::num {

// Builds a scalar from the given parameter leaves. Must be deterministic:
// every call with the same parameter values returns the same value.
using ScalarFunction = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Entries checked per parameter tensor; 0 checks all of them. Sampled
  // entries are chosen with `seed`.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
  // Richardson-extrapolated differences from steps h, h/2, h/4 starting at
  // epsilon. When the two extrapolations disagree (a kink lies inside the
  // stencil) h shrinks tenfold, down to 1e-6.
  bool richardson = false;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Compares reverse-mode gradients against central differences. The error of
// one entry is |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckResult grad_check(const ScalarFunction& fn, std::span<const Tensor> params,
                           const GradCheckOptions& options = {});

struct NamedCheck {
  std::string name;
  double max_rel_error = 0.0;
};

// One randomized finite-difference check per primitive.
std::vector<NamedCheck> primitive_grad_checks(std::uint64_t seed);

}  // namespace mvrisk::num

#endif  // MVRISK_GRADCHECK_HPP_
