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

#ifndef MVRISK_PIPELINE_HPP_
#define MVRISK_PIPELINE_HPP_

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvrisk/checkpoint.hpp"
#include "mvrisk/cohort_io.hpp"
#include "mvrisk/config.hpp"

namespace mvrisk {

// Each command writes only inside config.out and returns its summary
// document, which is also written there.

// patients.csv, events.csv, schema.json, synth_summary.json.
nlohmann::json run_synth(const RunConfig& config);

// ingest_report.json (and features.csv when features.dump is set).
nlohmann::json run_ingest(const RunConfig& config);

// checkpoint.json, train_log.csv, train_summary.json.
nlohmann::json run_train(const RunConfig& config,
                         const std::function<void(const EpochLog&)>& on_epoch = {});

// report.json, roc_points.csv.
nlohmann::json run_evaluate(const RunConfig& config, const std::string& checkpoint);

// compare.json.
nlohmann::json run_compare(const RunConfig& config, const std::string& checkpoint_a,
                           const std::string& checkpoint_b);

// heatmap.csv, explain.json.
nlohmann::json run_explain(const RunConfig& config, const std::string& checkpoint);

struct GradCheckLine {
  std::string name;
  double max_rel_error = 0.0;
  bool passed = false;
};

inline constexpr double kGradCheckTolerance = 1e-4;

// Primitive and end-to-end model checks; writes gradcheck.csv.
std::vector<GradCheckLine> run_gradcheck(const RunConfig& config);

// Loads the configured cohort and schema.
Cohort load_cohort(const RunConfig& config, IngestReport* report = nullptr);

// Evaluable windows of the configured evaluation partition, scored.
ScoredCohort score_for_eval(const Checkpoint& checkpoint, const Cohort& cohort, const RunConfig& config,
                            Dataset* dataset = nullptr);

}  // namespace mvrisk

#endif  // MVRISK_PIPELINE_HPP_
