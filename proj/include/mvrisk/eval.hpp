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

#ifndef MVRISK_EVAL_HPP_
#define MVRISK_EVAL_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mvrisk {

// Evaluable windows of one patient in hour order.
struct PatientScores {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

using ScoredCohort = std::vector<PatientScores>;

struct AlarmTrace {
  std::vector<std::size_t> alarms;
  std::vector<std::size_t> retained;
};

AlarmTrace apply_silencing(std::span<const double> scores, double threshold, int silence_hours = 6);

// Mann-Whitney AUC with ties counted one half.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Average precision; tied scores enter the ranking as one group.
double auc_pr(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct Confusion {
  std::uint64_t tp = 0, fn = 0, fp = 0, tn = 0;

  double tpr() const;
  double fpr() const;
};

struct RocPoint {
  double threshold = 0.0;  // +inf and -inf for the endpoints
  double tpr = 0.0;
  double fpr = 0.0;
  Confusion counts;
};

// One point per threshold: +inf, every unique score in descending order,
// then -inf.
std::vector<RocPoint> policy_roc(const ScoredCohort& cohort, int silence_hours = 6);

// Trapezoid area under policy_roc.
double policy_auc(const ScoredCohort& cohort, int silence_hours = 6);

struct OperatingPoint {
  double threshold = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double ppv = 0.0;
  std::uint64_t fp_count = 0;      // retained negative windows at or above threshold
  std::uint64_t false_alarms = 0;  // alarm events fired on negative windows
  std::uint64_t alarms = 0;
  Confusion counts;
};

OperatingPoint operating_point(const ScoredCohort& cohort, double target_sensitivity = 0.80,
                               int silence_hours = 6);

struct DeLongResult {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double variance = 0.0;
  double z = 0.0;
  double p = 1.0;
  bool degenerate = false;
};

DeLongResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                         std::span<const std::uint8_t> labels);

struct PrPoint {
  double threshold = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

std::vector<PrPoint> pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Concatenation of every patient's windows.
void pool(const ScoredCohort& cohort, std::vector<double>* scores, std::vector<std::uint8_t>* labels);

struct EvalSettings {
  int silence_hours = 6;
  double target_sensitivity = 0.80;
};

struct EvalReport {
  std::size_t patients = 0;
  std::size_t windows = 0;
  std::size_t positive_windows = 0;
  double auc = 0.0;        // under the silencing policy
  double auc_plain = 0.0;  // all windows, no silencing
  double auc_pr = 0.0;
  double score_min = 0.0;
  double score_max = 0.0;
  OperatingPoint op;
  std::vector<RocPoint> roc;
  std::vector<PrPoint> pr;
};

EvalReport evaluate_scores(const ScoredCohort& cohort, const EvalSettings& settings);
nlohmann::json report_to_json(const EvalReport& report, const EvalSettings& settings);
void write_roc_csv(const std::string& path, const std::vector<RocPoint>& roc);

}  // namespace mvrisk

#endif  // MVRISK_EVAL_HPP_
