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

#ifndef MVRISK_COHORT_IO_HPP_
#define MVRISK_COHORT_IO_HPP_

#include <map>
#include <string>

#include "mvrisk/cohort.hpp"

namespace mvrisk {

struct IngestReport {
  std::size_t patients_read = 0;
  std::size_t patients_kept = 0;
  std::size_t events_read = 0;
  std::map<std::string, std::size_t> excluded;  // by exclusion reason
};

// Writes <dir>/patients.csv, <dir>/events.csv and <dir>/schema.json.
void write_cohort(const std::string& dir, const Cohort& cohort);

FeatureSchema read_schema(const std::string& path);
void write_schema(const std::string& path, const FeatureSchema& schema);

// Reads and validates a cohort, bins events hourly, cross-checks the recorded
// MV onset against FiO2/PEEP co-measurement, and drops excluded stays.
Cohort read_cohort(const FeatureSchema& schema, const std::string& patients_csv,
                   const std::string& events_csv, IngestReport* report = nullptr);

// Shortest round-trip decimal form.
std::string format_double(double value);

}  // namespace mvrisk

#endif  // MVRISK_COHORT_IO_HPP_
