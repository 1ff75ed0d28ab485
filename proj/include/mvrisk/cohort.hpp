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

#ifndef MVRISK_COHORT_HPP_
#define MVRISK_COHORT_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvrisk/schema.hpp"

namespace mvrisk {

// Hours of ICU stay that only accumulate features; labeling starts here.
inline constexpr int kFirstLabeledHour = 4;
// Stays longer than 20 days are excluded.
inline constexpr double kMaxStayHours = 480.0;

struct OutcomeRecord {
  std::optional<int> mv_onset_hour;
  std::optional<double> mv_duration_hours;
  bool died_inpatient = false;
  bool noninvasive_mv = false;
  double los_hours = 0.0;

  bool ventilated() const noexcept { return mv_onset_hour.has_value(); }
};

enum class Partition : std::uint8_t { kUnassigned, kTrain, kValidation, kTest };

std::string_view partition_name(Partition p);

// One ICU stay on an hourly grid.
struct PatientRecord {
  std::string patient_id;
  int hours = 0;
  std::size_t width = 0;
  // hours x width, row-major. Missing cells hold NaN and a false mask bit.
  std::vector<double> raw_grid;
  std::vector<std::uint8_t> measured_mask;
  std::vector<std::uint8_t> comorbidities;
  OutcomeRecord outcome;
  Partition partition = Partition::kUnassigned;

  PatientRecord() = default;
  PatientRecord(std::string id, int hours, const FeatureSchema& schema);

  bool measured(int hour, std::size_t col) const {
    return measured_mask[static_cast<std::size_t>(hour) * width + col] != 0;
  }
  double raw(int hour, std::size_t col) const {
    return raw_grid[static_cast<std::size_t>(hour) * width + col];
  }
  void set(int hour, std::size_t col, double value);

  // Throws Error(kIngest) naming the patient when invariants are violated.
  void validate(const FeatureSchema& schema) const;
};

struct Cohort {
  FeatureSchema schema = FeatureSchema::default_schema();
  std::vector<PatientRecord> patients;
};

// Number of hourly bins covering a stay.
int stay_hours(double los_hours);

// Smallest hour at which FiO2 and PEEP are both measured.
std::optional<int> derive_mv_onset(const PatientRecord& record, const FeatureSchema& schema);

enum class ExclusionReason { kShortStay, kLongStay, kEarlyMv, kNoninvasiveMv };

std::string_view exclusion_name(ExclusionReason reason);

// nullopt means keep.
std::optional<ExclusionReason> exclude(const OutcomeRecord& outcome);

// 0: no invasive MV. 1: MV <= 24 h and survived. 2: MV > 24 h, or MV with
// inpatient death.
int composite_label(const OutcomeRecord& outcome);

struct WindowLabel {
  double target = 0.0;
  bool evaluable = false;
};

// One entry per hour of the stay.
std::vector<WindowLabel> window_labels(const PatientRecord& record, int horizon_hours = 24);

struct CohortSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// Patient-level split stratified by ventilation status. The test share is
// 1 - train_fraction; validation is carved out of the training share.
CohortSplit split_cohort(const std::vector<PatientRecord>& patients, double train_fraction,
                         double val_fraction_of_train, std::uint64_t seed);

void tag_partitions(std::vector<PatientRecord>& patients, const CohortSplit& split);

}  // namespace mvrisk

#endif  // MVRISK_COHORT_HPP_
