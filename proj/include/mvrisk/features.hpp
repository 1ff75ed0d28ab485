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

#ifndef MVRISK_FEATURES_HPP_
#define MVRISK_FEATURES_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvrisk/cohort.hpp"
#include "mvrisk/tensor.hpp"

namespace mvrisk {

inline constexpr double kDefaultTslmCap = 72.0;

struct Event {
  std::string patient_id;
  double hour = 0.0;
  std::string column;
  double value = 0.0;
};

struct BinnedGrid {
  int hours = 0;
  std::vector<double> values;        // hours x width, NaN when missing
  std::vector<std::uint8_t> mask;    // hours x width
};

// Median of each column's measurements within each hour. Events must belong
// to one stay and lie in [0, los_hours).
BinnedGrid bin_hourly(std::span<const Event> events, double los_hours, const FeatureSchema& schema);

// Model inputs for every hour of one stay.
struct HourlyInput {
  int hours = 0;
  std::size_t width = 0;
  std::size_t tracked = 0;
  std::vector<double> values;         // hours x width, fully imputed
  std::vector<double> tslm;           // hours x tracked, hours since last measurement
  std::vector<double> comorbidities;  // 0/1
  bool standardized = false;

  double value(int hour, std::size_t col) const { return values[static_cast<std::size_t>(hour) * width + col]; }
  double tslm_at(int hour, std::size_t slot) const { return tslm[static_cast<std::size_t>(hour) * tracked + slot]; }
};

// Carries the last measured value forward. Before the first measurement the
// schema reference is used and TSLM sits at the cap.
HourlyInput forward_fill(const PatientRecord& record, const FeatureSchema& schema,
                         double tslm_cap = kDefaultTslmCap);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& doc);
};

inline constexpr double kStdFloor = 1e-6;

// Mean and population standard deviation over measured cells. Every record
// must carry the training partition tag.
Standardizer fit_standardizer(std::span<const PatientRecord> train, const FeatureSchema& schema);
Standardizer fit_standardizer(std::span<const PatientRecord* const> train, const FeatureSchema& schema);

// z-scores clinical values in place; TSLM and comorbidities are untouched.
// Throws Error(kUsage) if the input was already standardized.
void apply_standardizer(HourlyInput& input, const Standardizer& standardizer);

// A (patient, hour) prediction unit.
struct WindowRef {
  std::uint32_t patient = 0;
  std::int32_t hour = 0;
};

// Model-facing batch. Clinical columns are split into TSLM-tracked and
// untracked blocks, each in schema order.
struct WindowBatch {
  std::size_t rows = 0;
  num::Tensor tracked;        // [rows, T]
  num::Tensor untracked;      // [rows, U]
  num::Tensor tslm;           // [rows, T]
  num::Tensor comorbidities;  // [rows, M]

  // Reads / writes clinical column `col` (schema index) of `row`.
  double clinical(std::size_t row, std::size_t col, const FeatureSchema& schema) const;
  void set_clinical(std::size_t row, std::size_t col, double value, const FeatureSchema& schema);
};

WindowBatch gather_windows(std::span<const HourlyInput> inputs, std::span<const WindowRef> refs,
                           const FeatureSchema& schema);

// Debug dump: patient_id,hour,column,value,tslm (tslm empty for untracked).
void write_features_csv(const std::string& path, std::span<const PatientRecord> records,
                        std::span<const HourlyInput> inputs, const FeatureSchema& schema);

}  // namespace mvrisk

#endif  // MVRISK_FEATURES_HPP_
