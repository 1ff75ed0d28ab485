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

#include "mvrisk/schema.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "mvrisk/error.hpp"

namespace mvrisk {
namespace {

struct ColumnSpec {
  const char* name;
  double reference;
  double spread;
};

constexpr ColumnSpec kVitals[] = {
    {"heart_rate", 84.0, 16.0}, {"o2sat", 97.0, 2.5},  {"temperature", 36.9, 0.6},
    {"sbp", 121.0, 19.0},       {"dbp", 64.0, 12.0},   {"map", 80.0, 13.0},
    {"resp_rate", 18.0, 4.5},   {"gcs", 14.0, 2.0},
};

constexpr ColumnSpec kLabs[] = {
    {"fio2", 0.3, 0.12},          {"peep", 5.0, 2.0},
    {"pao2", 95.0, 30.0},         {"paco2", 41.0, 7.0},
    {"sao2", 96.0, 3.0},          {"ph", 7.39, 0.06},
    {"bicarbonate", 24.0, 4.0},   {"base_excess", 0.0, 4.0},
    {"lactate", 1.6, 1.0},        {"calcium", 8.6, 0.6},
    {"ionized_calcium", 1.13, 0.08}, {"sodium", 139.0, 4.5},
    {"potassium", 4.1, 0.5},      {"chloride", 104.0, 5.0},
    {"magnesium", 2.0, 0.3},      {"phosphate", 3.5, 1.0},
    {"glucose", 135.0, 40.0},     {"bun", 22.0, 14.0},
    {"creatinine", 1.1, 0.8},     {"albumin", 3.3, 0.6},
    {"total_protein", 6.2, 0.8},  {"ast", 45.0, 40.0},
    {"alt", 38.0, 35.0},          {"bilirubin_total", 0.9, 0.9},
    {"alkaline_phosphatase", 90.0, 45.0}, {"ldh", 280.0, 120.0},
    {"ck", 200.0, 250.0},         {"hemoglobin", 10.8, 2.0},
    {"hematocrit", 32.5, 5.5},    {"wbc", 10.5, 4.5},
    {"neutrophils", 76.0, 10.0},  {"lymphocytes", 14.0, 8.0},
    {"platelets", 210.0, 90.0},   {"ptt", 33.0, 9.0},
    {"inr", 1.3, 0.4},            {"fibrinogen", 350.0, 120.0},
    {"troponin", 0.05, 0.1},      {"bnp", 300.0, 400.0},
    {"crp", 40.0, 50.0},          {"anion_gap", 13.0, 3.5},
    {"lipase", 40.0, 40.0},       {"amylase", 60.0, 40.0},
};

constexpr ColumnSpec kDemographics[] = {
    {"age", 64.0, 16.0},    {"sex_male", 0.0, 1.0},  {"weight", 80.0, 18.0},
    {"height", 169.0, 10.0}, {"bmi", 27.5, 5.5},     {"emergency_admission", 0.0, 1.0},
};

constexpr ColumnSpec kMedications[] = {
    {"on_anesthesia", 0.0, 1.0},   {"on_anticoagulants", 0.0, 1.0}, {"on_vasopressors", 0.0, 1.0},
    {"on_antibiotics", 0.0, 1.0},  {"on_sedatives", 0.0, 1.0},      {"on_opioids", 0.0, 1.0},
    {"on_steroids", 0.0, 1.0},     {"on_diuretics", 0.0, 1.0},      {"on_bronchodilators", 0.0, 1.0},
    {"on_insulin", 0.0, 1.0},      {"on_antiarrhythmics", 0.0, 1.0},
};

constexpr const char* kComorbidities[] = {
    "chf", "arrhythmia", "valvular_disease", "pulmonary_circulation", "peripheral_vascular",
    "hypertension", "paralysis", "neuro_other", "copd", "diabetes_uncomplicated",
    "diabetes_complicated", "hypothyroidism", "renal_failure", "liver_disease", "peptic_ulcer",
    "hiv_aids", "lymphoma", "metastatic_cancer", "solid_tumor", "rheumatoid_arthritis",
    "coagulopathy", "obesity", "weight_loss", "fluid_electrolyte", "blood_loss_anemia",
    "deficiency_anemia", "alcohol_abuse", "drug_abuse", "psychoses", "depression",
    "myocardial_infarction", "cerebrovascular", "dementia", "liver_cirrhosis", "malignancy",
    "asthma", "sleep_apnea", "pneumonia", "sepsis_history", "interstitial_lung_disease",
    "pulmonary_fibrosis", "cystic_fibrosis", "neuromuscular_disease", "myasthenia_gravis", "als",
    "stroke_history", "seizure_disorder", "parkinsons", "multiple_sclerosis", "chronic_pain",
    "osteoporosis", "gout", "lupus", "pancreatitis", "gi_bleed",
    "hepatitis", "tuberculosis", "transplant_history", "immunosuppression",
    "pulmonary_hypertension", "aortic_stenosis", "atrial_fibrillation",
};

}  // namespace

std::string_view group_name(FeatureGroup group) {
  switch (group) {
    case FeatureGroup::kVital: return "vital";
    case FeatureGroup::kLab: return "lab";
    case FeatureGroup::kDemographic: return "demographic";
    case FeatureGroup::kMedication: return "medication";
  }
  return "vital";
}

FeatureGroup parse_group(std::string_view name) {
  if (name == "vital") return FeatureGroup::kVital;
  if (name == "lab") return FeatureGroup::kLab;
  if (name == "demographic") return FeatureGroup::kDemographic;
  if (name == "medication") return FeatureGroup::kMedication;
  fail(ErrorCode::kConfig, "unknown feature group '" + std::string(name) + "'");
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

FeatureSchema::FeatureSchema(std::vector<ClinicalColumn> clinical,
                             std::vector<std::string> comorbidities,
                             std::vector<std::string> tslm_tracked, std::string fio2_column,
                             std::string peep_column)
    : clinical_(std::move(clinical)),
      comorbidities_(std::move(comorbidities)),
      tracked_names_(std::move(tslm_tracked)),
      fio2_column_(std::move(fio2_column)),
      peep_column_(std::move(peep_column)) {
  index();
}

FeatureSchema FeatureSchema::default_schema() {
  std::vector<ClinicalColumn> clinical;
  std::vector<std::string> tracked;
  auto append = [&](const auto& specs, FeatureGroup group, bool track) {
    for (const ColumnSpec& s : specs) {
      clinical.push_back({s.name, group, s.reference, s.spread});
      if (track) tracked.emplace_back(s.name);
    }
  };
  append(kVitals, FeatureGroup::kVital, true);
  append(kLabs, FeatureGroup::kLab, true);
  append(kDemographics, FeatureGroup::kDemographic, false);
  append(kMedications, FeatureGroup::kMedication, false);
  std::vector<std::string> comorbidities(std::begin(kComorbidities), std::end(kComorbidities));
  FeatureSchema schema(std::move(clinical), std::move(comorbidities), std::move(tracked), "fio2", "peep");
  schema.validate();
  return schema;
}

void FeatureSchema::index() {
  tslm_tracked_.clear();
  untracked_.clear();
  tracked_slot_.assign(clinical_.size(), npos);
  std::set<std::string> tracked(tracked_names_.begin(), tracked_names_.end());
  for (std::size_t i = 0; i < clinical_.size(); ++i) {
    if (tracked.count(clinical_[i].name)) {
      tracked_slot_[i] = tslm_tracked_.size();
      tslm_tracked_.push_back(i);
    } else {
      untracked_.push_back(i);
    }
  }
}

void FeatureSchema::validate() const {
  if (clinical_.empty()) fail(ErrorCode::kConfig, "schema has no clinical columns");
  std::set<std::string> names;
  for (const ClinicalColumn& c : clinical_) {
    if (c.name.empty()) fail(ErrorCode::kConfig, "schema column with empty name");
    if (!names.insert(c.name).second) fail(ErrorCode::kConfig, "duplicate clinical column '" + c.name + "'");
    if (!(c.spread > 0.0)) fail(ErrorCode::kConfig, "column '" + c.name + "' needs a positive spread");
  }
  std::set<std::string> comorb;
  for (const std::string& c : comorbidities_) {
    if (!comorb.insert(c).second) fail(ErrorCode::kConfig, "duplicate comorbidity column '" + c + "'");
  }
  for (const std::string& t : tracked_names_) {
    auto idx = clinical_index(t);
    if (!idx) fail(ErrorCode::kConfig, "tslm-tracked column '" + t + "' is not a clinical column");
    const FeatureGroup g = clinical_[*idx].group;
    if (g != FeatureGroup::kVital && g != FeatureGroup::kLab) {
      fail(ErrorCode::kConfig, "tslm-tracked column '" + t + "' must be a vital or lab");
    }
  }
  if (tracked_names_.size() != tslm_tracked_.size()) {
    fail(ErrorCode::kConfig, "tslm_tracked lists a column more than once");
  }
  if (!clinical_index(fio2_column_)) fail(ErrorCode::kConfig, "fio2 column '" + fio2_column_ + "' is not a clinical column");
  if (!clinical_index(peep_column_)) fail(ErrorCode::kConfig, "peep column '" + peep_column_ + "' is not a clinical column");
}

std::optional<std::size_t> FeatureSchema::clinical_index(std::string_view name) const {
  for (std::size_t i = 0; i < clinical_.size(); ++i) {
    if (clinical_[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> FeatureSchema::comorbidity_index(std::string_view name) const {
  for (std::size_t i = 0; i < comorbidities_.size(); ++i) {
    if (comorbidities_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t FeatureSchema::fio2_index() const {
  auto idx = clinical_index(fio2_column_);
  if (!idx) fail(ErrorCode::kConfig, "schema has no fio2 column '" + fio2_column_ + "'");
  return *idx;
}

std::size_t FeatureSchema::peep_index() const {
  auto idx = clinical_index(peep_column_);
  if (!idx) fail(ErrorCode::kConfig, "schema has no peep column '" + peep_column_ + "'");
  return *idx;
}

std::size_t FeatureSchema::tracked_slot(std::size_t clinical_index) const {
  return clinical_index < tracked_slot_.size() ? tracked_slot_[clinical_index] : npos;
}

nlohmann::json FeatureSchema::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const ClinicalColumn& c : clinical_) {
    cols.push_back({{"name", c.name},
                    {"group", std::string(group_name(c.group))},
                    {"reference", c.reference},
                    {"spread", c.spread}});
  }
  return {{"clinical_columns", cols},
          {"comorbidity_columns", comorbidities_},
          {"tslm_tracked", tracked_names_},
          {"fio2_column", fio2_column_},
          {"peep_column", peep_column_}};
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& doc) {
  try {
    std::vector<ClinicalColumn> clinical;
    for (const auto& c : doc.at("clinical_columns")) {
      clinical.push_back({c.at("name").get<std::string>(), parse_group(c.at("group").get<std::string>()),
                          c.value("reference", 0.0), c.value("spread", 1.0)});
    }
    FeatureSchema schema(std::move(clinical), doc.at("comorbidity_columns").get<std::vector<std::string>>(),
                         doc.at("tslm_tracked").get<std::vector<std::string>>(),
                         doc.at("fio2_column").get<std::string>(), doc.at("peep_column").get<std::string>());
    schema.validate();
    return schema;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, std::string("malformed schema document: ") + e.what());
  }
}

std::string FeatureSchema::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  return buf;
}

}  // namespace mvrisk
