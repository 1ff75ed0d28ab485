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

#ifndef MVRISK_SYNTH_HPP_
#define MVRISK_SYNTH_HPP_

#include <cstdint>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "mvrisk/cohort.hpp"

namespace mvrisk {

struct MedianIqr {
  double median = 1.0;
  double q1 = 0.5;
  double q3 = 2.0;
};

// Measurements follow a fixed period with a random phase, plus independent
// extra measurements with probability `extra_rate` in every other hour. With
// period <= 4 the time-since-last-measurement distribution no longer depends
// on the hour of stay once labeling starts.
struct MeasurementPlan {
  int period = 1;
  double extra_rate = 0.0;

  double expected_rate() const;
};

struct SynthConfig {
  std::size_t n_patients = 1000;
  double ventilated_fraction = 0.1926;
  MedianIqr onset{16.0, 8.0, 41.0};
  MedianIqr los_vent{92.0, 49.0, 173.8};
  MedianIqr los_nonvent{42.6, 25.0, 74.7};
  MedianIqr mv_duration{40.0, 15.0, 110.0};
  double mortality_vent = 0.1574;
  double mortality_nonvent = 0.0894;
  MeasurementPlan vital_plan{2, 0.5};
  MeasurementPlan lab_plan{4, 0.15};
  double medication_rate = 0.5;
  // Per-column overrides of the group plans.
  std::map<std::string, MeasurementPlan> column_plans;
  // Scales the pre-onset deterioration and the comorbidity-conditional risk.
  // Zero makes every input independent of the label.
  double signal_strength = 1.0;
  int deterioration_hours = 24;
  std::uint64_t seed = 0;

  // Throws Error(kConfig) for infeasible settings.
  void validate() const;
};

SynthConfig synth_config_from_json(const nlohmann::json& doc);
nlohmann::json synth_config_to_json(const SynthConfig& config);

// Comorbidities whose prevalence rises among ventilated patients.
const std::vector<std::string>& respiratory_risk_comorbidities();

// Deterministic per (seed, patient index). Every generated stay already passes
// exclusion, and derive_mv_onset reproduces the recorded onset hour.
Cohort generate_synthetic(const SynthConfig& config,
                          const FeatureSchema& schema = FeatureSchema::default_schema());

}  // namespace mvrisk

#endif  // MVRISK_SYNTH_HPP_
