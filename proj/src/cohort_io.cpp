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

#include "mvrisk/cohort_io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "mvrisk/error.hpp"
#include "mvrisk/features.hpp"

namespace mvrisk {
namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
    out.back().remove_suffix(1);
  }
  return out;
}

double parse_double(std::string_view s, const std::string& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorCode::kIngest, where + ": cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

bool parse_bool(std::string_view s, const std::string& where) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  fail(ErrorCode::kIngest, where + ": expected 0/1, got '" + std::string(s) + "'");
}

std::ifstream open_input(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::kIo, "cannot read " + path);
  return is;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, static_cast<std::size_t>(res.ptr - buf));
}

FeatureSchema read_schema(const std::string& path) {
  std::ifstream is = open_input(path);
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kConfig, "schema " + path + ": " + e.what());
  }
  return FeatureSchema::from_json(doc);
}

void write_schema(const std::string& path, const FeatureSchema& schema) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::kIo, "cannot write " + path);
  os << schema.to_json().dump(2) << '\n';
}

void write_cohort(const std::string& dir, const Cohort& cohort) {
  std::filesystem::create_directories(dir);
  const FeatureSchema& schema = cohort.schema;
  write_schema(dir + "/schema.json", schema);

  std::ofstream pat(dir + "/patients.csv");
  if (!pat) fail(ErrorCode::kIo, "cannot write " + dir + "/patients.csv");
  pat << "patient_id,los_hours,mv_onset_hour,mv_duration_hours,died_inpatient,noninvasive_mv";
  for (const std::string& c : schema.comorbidities()) pat << ',' << c;
  pat << '\n';
  for (const PatientRecord& r : cohort.patients) {
    const OutcomeRecord& o = r.outcome;
    pat << r.patient_id << ',' << format_double(o.los_hours) << ',';
    if (o.mv_onset_hour) pat << *o.mv_onset_hour;
    pat << ',';
    if (o.mv_duration_hours) pat << format_double(*o.mv_duration_hours);
    pat << ',' << (o.died_inpatient ? 1 : 0) << ',' << (o.noninvasive_mv ? 1 : 0);
    for (std::uint8_t c : r.comorbidities) pat << ',' << static_cast<int>(c);
    pat << '\n';
  }

  std::ofstream ev(dir + "/events.csv");
  if (!ev) fail(ErrorCode::kIo, "cannot write " + dir + "/events.csv");
  ev << "patient_id,hour,column_name,value\n";
  for (const PatientRecord& r : cohort.patients) {
    for (int t = 0; t < r.hours; ++t) {
      for (std::size_t j = 0; j < r.width; ++j) {
        if (!r.measured(t, j)) continue;
        ev << r.patient_id << ',' << t << ',' << schema.clinical()[j].name << ','
           << format_double(r.raw(t, j)) << '\n';
      }
    }
  }
}

Cohort read_cohort(const FeatureSchema& schema, const std::string& patients_csv,
                   const std::string& events_csv, IngestReport* report) {
  schema.validate();
  IngestReport rep;
  Cohort cohort;
  cohort.schema = schema;

  std::vector<PatientRecord> records;
  std::unordered_map<std::string, std::size_t> by_id;
  {
    std::ifstream is = open_input(patients_csv);
    std::string line;
    if (!std::getline(is, line)) fail(ErrorCode::kIngest, patients_csv + ": empty file");
    const auto header = split_csv(line);
    static const char* kFixed[] = {"patient_id", "los_hours", "mv_onset_hour", "mv_duration_hours",
                                   "died_inpatient", "noninvasive_mv"};
    const std::size_t n_comorb = schema.comorbidity_width();
    if (header.size() != 6 + n_comorb) {
      fail(ErrorCode::kIngest, patients_csv + ": expected " + std::to_string(6 + n_comorb) + " columns, got " +
                                   std::to_string(header.size()));
    }
    for (std::size_t i = 0; i < 6; ++i) {
      if (header[i] != kFixed[i]) fail(ErrorCode::kIngest, patients_csv + ": unexpected header '" + std::string(header[i]) + "'");
    }
    for (std::size_t k = 0; k < n_comorb; ++k) {
      if (header[6 + k] != schema.comorbidities()[k]) {
        fail(ErrorCode::kIngest, patients_csv + ": comorbidity column '" + std::string(header[6 + k]) +
                                     "' does not match schema column '" + schema.comorbidities()[k] + "'");
      }
    }
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto f = split_csv(line);
      const std::string where = patients_csv + ":" + std::to_string(line_no);
      if (f.size() != header.size()) fail(ErrorCode::kIngest, where + ": wrong field count");
      OutcomeRecord o;
      o.los_hours = parse_double(f[1], where);
      if (!f[2].empty()) o.mv_onset_hour = static_cast<int>(parse_double(f[2], where));
      if (!f[3].empty()) o.mv_duration_hours = parse_double(f[3], where);
      o.died_inpatient = parse_bool(f[4], where);
      o.noninvasive_mv = parse_bool(f[5], where);
      if (!(o.los_hours > 0.0)) fail(ErrorCode::kIngest, where + ": los_hours must be positive");
      PatientRecord r(std::string(f[0]), stay_hours(o.los_hours), schema);
      r.outcome = o;
      for (std::size_t k = 0; k < n_comorb; ++k) r.comorbidities[k] = parse_bool(f[6 + k], where) ? 1 : 0;
      if (!by_id.emplace(r.patient_id, records.size()).second) {
        fail(ErrorCode::kIngest, where + ": duplicate patient_id " + r.patient_id);
      }
      records.push_back(std::move(r));
    }
  }

  std::vector<std::vector<Event>> events(records.size());
  {
    std::ifstream is = open_input(events_csv);
    std::string line;
    if (!std::getline(is, line)) fail(ErrorCode::kIngest, events_csv + ": empty file");
    const auto header = split_csv(line);
    if (header.size() != 4 || header[0] != "patient_id" || header[1] != "hour" || header[2] != "column_name" ||
        header[3] != "value") {
      fail(ErrorCode::kIngest, events_csv + ": expected header patient_id,hour,column_name,value");
    }
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto f = split_csv(line);
      const std::string where = events_csv + ":" + std::to_string(line_no);
      if (f.size() != 4) fail(ErrorCode::kIngest, where + ": wrong field count");
      auto it = by_id.find(std::string(f[0]));
      if (it == by_id.end()) fail(ErrorCode::kIngest, where + ": unknown patient_id " + std::string(f[0]));
      events[it->second].push_back(
          {std::string(f[0]), parse_double(f[1], where), std::string(f[2]), parse_double(f[3], where)});
      ++rep.events_read;
    }
  }

  rep.patients_read = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    PatientRecord& r = records[i];
    BinnedGrid grid = bin_hourly(events[i], r.outcome.los_hours, schema);
    r.raw_grid = std::move(grid.values);
    r.measured_mask = std::move(grid.mask);
    r.validate(schema);
    const std::optional<int> derived = derive_mv_onset(r, schema);
    if (derived != r.outcome.mv_onset_hour) {
      fail(ErrorCode::kIngest, "patient " + r.patient_id + ": recorded mv_onset_hour " +
                                   (r.outcome.mv_onset_hour ? std::to_string(*r.outcome.mv_onset_hour) : "none") +
                                   " disagrees with first FiO2+PEEP co-measurement " +
                                   (derived ? std::to_string(*derived) : "none"));
    }
    if (auto reason = exclude(r.outcome)) {
      ++rep.excluded[std::string(exclusion_name(*reason))];
      continue;
    }
    cohort.patients.push_back(std::move(r));
  }
  rep.patients_kept = cohort.patients.size();
  if (report) *report = rep;
  return cohort;
}

}  // namespace mvrisk
