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

#ifndef MVRISK_EXPLAIN_HPP_
#define MVRISK_EXPLAIN_HPP_

#include <functional>
#include <string>
#include <vector>

#include "mvrisk/features.hpp"

namespace mvrisk {

// Risk scores for every row of a batch.
using RiskFn = std::function<std::vector<double>(const WindowBatch&)>;

// Clinical names in schema order, then comorbidity names.
std::vector<std::string> relevance_names(const FeatureSchema& schema);

// risk(actual) - risk(variable at reference), one vector per batch row. The
// reference is 0 for standardized clinical values and absent for comorbidities.
std::vector<std::vector<double>> relevance(const RiskFn& risk, const WindowBatch& batch, const FeatureSchema& schema);

struct HeatmapSettings {
  int hours_before = 12;
  std::size_t top_k = 3;
  std::size_t rows = 15;
};

struct Heatmap {
  std::vector<std::string> variables;       // every relevance variable
  std::vector<int> hours;                   // hours before onset, descending
  std::vector<std::vector<double>> full;    // [variable][hour] top-k fractions
  std::vector<double> mean_abs_relevance;   // per variable
  std::vector<std::size_t> rows;            // displayed variables, by magnitude
  std::size_t patients = 0;
};

// `windows[p][h - 1]` is patient p's window at onset - h.
Heatmap heatmap(const RiskFn& risk, std::span<const HourlyInput> inputs,
                const std::vector<std::vector<WindowRef>>& windows, const FeatureSchema& schema,
                const HeatmapSettings& settings);

void write_heatmap_csv(const std::string& path, const Heatmap& map);

}  // namespace mvrisk

#endif  // MVRISK_EXPLAIN_HPP_
