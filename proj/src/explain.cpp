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

#include "mvrisk/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mvrisk/cohort_io.hpp"
#include "mvrisk/error.hpp"

namespace mvrisk {

std::vector<std::string> relevance_names(const FeatureSchema& schema) {
  std::vector<std::string> names;
  for (const ClinicalColumn& c : schema.clinical()) names.push_back(c.name);
  for (const std::string& c : schema.comorbidities()) names.push_back(c);
  return names;
}

std::vector<std::vector<double>> relevance(const RiskFn& risk, const WindowBatch& batch, const FeatureSchema& schema) {
  const std::size_t C = schema.clinical_width(), M = schema.comorbidity_width(), V = C + M;
  const std::size_t per = 1 + V;
  WindowBatch big;
  big.rows = batch.rows * per;
  auto expand = [&](const num::Tensor& t) {
    const std::size_t w = t.dim(1);
    num::Tensor out({big.rows, w});
    for (std::size_t r = 0; r < batch.rows; ++r) {
      for (std::size_t k = 0; k < per; ++k) std::copy(t.raw() + r * w, t.raw() + (r + 1) * w, out.raw() + (r * per + k) * w);
    }
    return out;
  };
  big.tracked = expand(batch.tracked);
  big.untracked = expand(batch.untracked);
  big.tslm = expand(batch.tslm);
  big.comorbidities = expand(batch.comorbidities);
  for (std::size_t r = 0; r < batch.rows; ++r) {
    for (std::size_t j = 0; j < C; ++j) big.set_clinical(r * per + 1 + j, j, 0.0, schema);
    for (std::size_t k = 0; k < M; ++k) big.comorbidities.at(r * per + 1 + C + k, k) = 0.0;
  }
  const std::vector<double> scores = risk(big);
  if (scores.size() != big.rows) fail(ErrorCode::kShape, "risk function returned the wrong number of scores");
  std::vector<std::vector<double>> out(batch.rows, std::vector<double>(V));
  for (std::size_t r = 0; r < batch.rows; ++r) {
    const double base = scores[r * per];
    for (std::size_t v = 0; v < V; ++v) out[r][v] = base - scores[r * per + 1 + v];
  }
  return out;
}

Heatmap heatmap(const RiskFn& risk, std::span<const HourlyInput> inputs,
                const std::vector<std::vector<WindowRef>>& windows, const FeatureSchema& schema,
                const HeatmapSettings& s) {
  if (s.hours_before < 1) fail(ErrorCode::kConfig, "explain.hours_before must be >= 1");
  const std::vector<std::string> names = relevance_names(schema);
  const std::size_t V = names.size();
  if (s.top_k < 1 || s.top_k > V) fail(ErrorCode::kConfig, "explain.top_k must lie in [1, variable count]");
  std::vector<WindowRef> refs;
  for (const auto& w : windows) {
    if (w.size() != static_cast<std::size_t>(s.hours_before)) {
      fail(ErrorCode::kUsage, "heatmap: every patient needs exactly hours_before windows");
    }
    refs.insert(refs.end(), w.begin(), w.end());
  }
  if (refs.empty()) fail(ErrorCode::kUndefinedMetric, "heatmap: no ventilated patients with enough pre-onset hours");

  Heatmap map;
  map.variables = names;
  map.patients = windows.size();
  for (int h = s.hours_before; h >= 1; --h) map.hours.push_back(h);
  const std::size_t H = map.hours.size();
  map.full.assign(V, std::vector<double>(H, 0.0));
  map.mean_abs_relevance.assign(V, 0.0);

  constexpr std::size_t kChunk = 64;
  std::vector<std::size_t> order(V);
  for (std::size_t begin = 0; begin < refs.size(); begin += kChunk) {
    const std::size_t end = std::min(refs.size(), begin + kChunk);
    const WindowBatch batch = gather_windows(inputs, std::span<const WindowRef>(refs).subspan(begin, end - begin), schema);
    const auto rel = relevance(risk, batch, schema);
    for (std::size_t i = 0; i < rel.size(); ++i) {
      const std::size_t h_index = (begin + i) % H;  // position in windows[p], i.e. h - 1
      const std::size_t col = H - 1 - h_index;
      for (std::size_t v = 0; v < V; ++v) map.mean_abs_relevance[v] += std::fabs(rel[i][v]);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(s.top_k), order.end(),
                        [&](std::size_t a, std::size_t b) {
                          return rel[i][a] != rel[i][b] ? rel[i][a] > rel[i][b] : a < b;
                        });
      for (std::size_t k = 0; k < s.top_k; ++k) map.full[order[k]][col] += 1.0;
    }
  }
  const double np = static_cast<double>(map.patients);
  for (auto& row : map.full) {
    for (double& x : row) x /= np;
  }
  for (double& x : map.mean_abs_relevance) x /= static_cast<double>(refs.size());
  std::vector<std::size_t> rank(V);
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return map.mean_abs_relevance[a] > map.mean_abs_relevance[b];
  });
  rank.resize(std::min(s.rows, V));
  map.rows = rank;
  return map;
}

void write_heatmap_csv(const std::string& path, const Heatmap& map) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::kIo, "cannot write " + path);
  os << "variable,hour_before_onset,fraction\n";
  for (std::size_t v : map.rows) {
    for (std::size_t c = 0; c < map.hours.size(); ++c) {
      os << map.variables[v] << ',' << map.hours[c] << ',' << format_double(map.full[v][c]) << '\n';
    }
  }
}

}  // namespace mvrisk
