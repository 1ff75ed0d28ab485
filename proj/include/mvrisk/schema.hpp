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

#ifndef MVRISK_SCHEMA_HPP_
#define MVRISK_SCHEMA_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mvrisk {

enum class FeatureGroup { kVital, kLab, kDemographic, kMedication };

std::string_view group_name(FeatureGroup group);
FeatureGroup parse_group(std::string_view name);

struct ClinicalColumn {
  std::string name;
  FeatureGroup group = FeatureGroup::kVital;
  // Population-normal value in raw units; imputed before the first measurement.
  double reference = 0.0;
  // Typical between-patient spread in raw units (used by the synthetic generator).
  double spread = 1.0;
};

// Declares the clinical and comorbidity columns a cohort and a model agree on.
class FeatureSchema {
 public:
  // 8 vitals, 42 labs, 6 demographics, 11 medications, 62 comorbidities.
  static FeatureSchema default_schema();
  static FeatureSchema from_json(const nlohmann::json& doc);

  nlohmann::json to_json() const;

  // Throws Error(kConfig) when invariants are violated.
  void validate() const;

  // Stable 64-bit FNV-1a hash of the canonical JSON form, as 16 hex digits.
  std::string hash() const;

  const std::vector<ClinicalColumn>& clinical() const noexcept { return clinical_; }
  const std::vector<std::string>& comorbidities() const noexcept { return comorbidities_; }
  // Indices into clinical(), ascending.
  const std::vector<std::size_t>& tslm_tracked() const noexcept { return tslm_tracked_; }
  // Clinical indices that are not TSLM-tracked, ascending.
  const std::vector<std::size_t>& untracked() const noexcept { return untracked_; }

  std::size_t clinical_width() const noexcept { return clinical_.size(); }
  std::size_t comorbidity_width() const noexcept { return comorbidities_.size(); }
  std::size_t tracked_width() const noexcept { return tslm_tracked_.size(); }

  std::size_t fio2_index() const;
  std::size_t peep_index() const;

  std::optional<std::size_t> clinical_index(std::string_view name) const;
  std::optional<std::size_t> comorbidity_index(std::string_view name) const;

  // Position of each tracked column inside tslm_tracked(), or npos.
  std::size_t tracked_slot(std::size_t clinical_index) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  // Construction for custom schemas; call validate() afterwards.
  FeatureSchema(std::vector<ClinicalColumn> clinical, std::vector<std::string> comorbidities,
                std::vector<std::string> tslm_tracked, std::string fio2_column,
                std::string peep_column);

 private:
  FeatureSchema() = default;
  void index();

  std::vector<ClinicalColumn> clinical_;
  std::vector<std::string> comorbidities_;
  std::vector<std::string> tracked_names_;
  std::string fio2_column_;
  std::string peep_column_;

  std::vector<std::size_t> tslm_tracked_;
  std::vector<std::size_t> untracked_;
  std::vector<std::size_t> tracked_slot_;
};

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace mvrisk

#endif  // MVRISK_SCHEMA_HPP_
