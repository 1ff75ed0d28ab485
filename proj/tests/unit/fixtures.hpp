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


#ifndef MVRISK_TESTS_FIXTURES_HPP_
#define MVRISK_TESTS_FIXTURES_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "mvrisk/cohort.hpp"
#include "mvrisk/features.hpp"
#include "mvrisk/synth.hpp"
#include "mvrisk/train.hpp"

namespace mvrisk::testing {

// Synthetic cohort split with the default fractions, standardized on train.
inline Dataset small_dataset(std::size_t patients, std::uint64_t seed, double signal = 1.0,
                             Cohort* cohort_out = nullptr) {
  SynthConfig sc;
  sc.n_patients = patients;
  sc.seed = seed;
  sc.signal_strength = signal;
  Cohort cohort = generate_synthetic(sc);
  tag_partitions(cohort.patients, split_cohort(cohort.patients, 0.8, 0.1, seed));
  std::vector<const PatientRecord*> train;
  for (const auto& p : cohort.patients) {
    if (p.partition == Partition::kTrain) train.push_back(&p);
  }
  const Standardizer st = fit_standardizer(std::span<const PatientRecord* const>(train), cohort.schema);
  Dataset d = prepare_dataset(cohort, st, kDefaultTslmCap, 24);
  if (cohort_out) *cohort_out = std::move(cohort);
  return d;
}

inline std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mvrisk_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace mvrisk::testing

#endif  // MVRISK_TESTS_FIXTURES_HPP_
