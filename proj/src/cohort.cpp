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

#include "mvrisk/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "mvrisk/error.hpp"

namespace mvrisk {

std::string_view partition_name(Partition p) {
  switch (p) {
    case Partition::kUnassigned: return "unassigned";
    case Partition::kTrain: return "train";
    case Partition::kValidation: return "validation";
    case Partition::kTest: return "test";
  }
  return "unassigned";
}

PatientRecord::PatientRecord(std::string id, int h, const FeatureSchema& schema)
    : patient_id(std::move(id)),
      hours(h),
      width(schema.clinical_width()),
      raw_grid(static_cast<std::size_t>(h) * schema.clinical_width(),
               std::numeric_limits<double>::quiet_NaN()),
      measured_mask(static_cast<std::size_t>(h) * schema.clinical_width(), 0),
      comorbidities(schema.comorbidity_width(), 0) {}

void PatientRecord::set(int hour, std::size_t col, double value) {
  const std::size_t k = static_cast<std::size_t>(hour) * width + col;
  raw_grid[k] = value;
  measured_mask[k] = 1;
}

void PatientRecord::validate(const FeatureSchema& schema) const {
  auto bad = [&](const std::string& what) {
    fail(ErrorCode::kIngest, "patient " + patient_id + ": " + what);
  };
  if (hours < 1) bad("hours must be >= 1");
  if (width != schema.clinical_width()) bad("grid width does not match schema");
  const std::size_t cells = static_cast<std::size_t>(hours) * width;
  if (raw_grid.size() != cells || measured_mask.size() != cells) bad("grid size mismatch");
  for (std::size_t k = 0; k < cells; ++k) {
    if ((measured_mask[k] != 0) == std::isnan(raw_grid[k])) bad("mask disagrees with grid presence");
  }
  if (comorbidities.size() != schema.comorbidity_width()) bad("comorbidity width mismatch");
  if (!(outcome.los_hours > 0.0)) bad("los_hours must be positive");
  if (outcome.mv_onset_hour.has_value() != outcome.mv_duration_hours.has_value()) {
    bad("mv_duration_hours must be present exactly when mv_onset_hour is");
  }
  if (outcome.mv_onset_hour) {
    if (*outcome.mv_onset_hour < 0 || *outcome.mv_onset_hour >= outcome.los_hours) {
      bad("mv_onset_hour must lie in [0, los_hours)");
    }
    if (!(*outcome.mv_duration_hours > 0.0)) bad("mv_duration_hours must be positive");
  }
}

int stay_hours(double los_hours) {
  return std::max(1, static_cast<int>(std::ceil(los_hours)));
}

std::optional<int> derive_mv_onset(const PatientRecord& record, const FeatureSchema& schema) {
  const std::size_t fio2 = schema.fio2_index();
  const std::size_t peep = schema.peep_index();
  for (int t = 0; t < record.hours; ++t) {
    if (record.measured(t, fio2) && record.measured(t, peep)) return t;
  }
  return std::nullopt;
}

std::string_view exclusion_name(ExclusionReason reason) {
  switch (reason) {
    case ExclusionReason::kShortStay: return "short_stay";
    case ExclusionReason::kLongStay: return "long_stay";
    case ExclusionReason::kEarlyMv: return "early_mv";
    case ExclusionReason::kNoninvasiveMv: return "noninvasive_mv";
  }
  return "unknown";
}

std::optional<ExclusionReason> exclude(const OutcomeRecord& outcome) {
  if (outcome.los_hours < 4.0) return ExclusionReason::kShortStay;
  if (outcome.los_hours > kMaxStayHours) return ExclusionReason::kLongStay;
  if (outcome.mv_onset_hour && *outcome.mv_onset_hour < kFirstLabeledHour) return ExclusionReason::kEarlyMv;
  if (outcome.noninvasive_mv) return ExclusionReason::kNoninvasiveMv;
  return std::nullopt;
}

int composite_label(const OutcomeRecord& outcome) {
  if (!outcome.ventilated()) return 0;
  const double duration = outcome.mv_duration_hours.value_or(0.0);
  if (duration <= 24.0 && !outcome.died_inpatient) return 1;
  return 2;
}

std::vector<WindowLabel> window_labels(const PatientRecord& record, int horizon_hours) {
  std::vector<WindowLabel> labels(static_cast<std::size_t>(record.hours));
  const int score = composite_label(record.outcome);
  const std::optional<int> onset = record.outcome.mv_onset_hour;
  for (int t = kFirstLabeledHour; t < record.hours; ++t) {
    WindowLabel& w = labels[static_cast<std::size_t>(t)];
    if (onset && t >= *onset) continue;
    w.evaluable = true;
    w.target = (onset && t >= *onset - horizon_hours) ? score : 0.0;
  }
  return labels;
}

namespace {

// Splits `total` into parts proportional to `sizes` by largest remainder.
std::vector<std::size_t> allocate(std::size_t total, const std::vector<std::size_t>& sizes) {
  std::size_t n = 0;
  for (std::size_t s : sizes) n += s;
  std::vector<std::size_t> out(sizes.size(), 0);
  if (n == 0) return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double exact = static_cast<double>(total) * static_cast<double>(sizes[i]) / static_cast<double>(n);
    out[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += out[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k) {
    const std::size_t i = remainders[k].second;
    if (out[i] < sizes[i]) {
      ++out[i];
      ++assigned;
    }
  }
  return out;
}

}  // namespace

CohortSplit split_cohort(const std::vector<PatientRecord>& patients, double train_fraction,
                         double val_fraction_of_train, std::uint64_t seed) {
  if (patients.size() < 10) {
    fail(ErrorCode::kConfig, "split_cohort needs at least 10 patients to stratify, got " +
                                 std::to_string(patients.size()));
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0) ||
      !(val_fraction_of_train >= 0.0 && val_fraction_of_train < 1.0)) {
    fail(ErrorCode::kConfig, "split fractions must lie in (0,1)");
  }
  std::vector<std::vector<std::size_t>> strata(2);
  for (std::size_t i = 0; i < patients.size(); ++i) {
    strata[patients[i].outcome.ventilated() ? 1 : 0].push_back(i);
  }
  std::mt19937_64 rng(seed);
  for (auto& s : strata) std::shuffle(s.begin(), s.end(), rng);

  const std::size_t n = patients.size();
  const auto n_test_total = static_cast<std::size_t>(std::llround(static_cast<double>(n) * (1.0 - train_fraction)));
  const std::vector<std::size_t> sizes{strata[0].size(), strata[1].size()};
  const std::vector<std::size_t> n_test = allocate(n_test_total, sizes);
  const std::vector<std::size_t> train_side{sizes[0] - n_test[0], sizes[1] - n_test[1]};
  const auto n_val_total = static_cast<std::size_t>(
      std::llround(static_cast<double>(train_side[0] + train_side[1]) * val_fraction_of_train));
  const std::vector<std::size_t> n_val = allocate(n_val_total, train_side);

  CohortSplit split;
  for (std::size_t s = 0; s < 2; ++s) {
    const auto& ids = strata[s];
    std::size_t k = 0;
    for (; k < n_test[s]; ++k) split.test.push_back(ids[k]);
    for (std::size_t v = 0; v < n_val[s]; ++v, ++k) split.validation.push_back(ids[k]);
    for (; k < ids.size(); ++k) split.train.push_back(ids[k]);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

void tag_partitions(std::vector<PatientRecord>& patients, const CohortSplit& split) {
  for (PatientRecord& p : patients) p.partition = Partition::kUnassigned;
  for (std::size_t i : split.train) patients.at(i).partition = Partition::kTrain;
  for (std::size_t i : split.validation) patients.at(i).partition = Partition::kValidation;
  for (std::size_t i : split.test) patients.at(i).partition = Partition::kTest;
}

}  // namespace mvrisk
