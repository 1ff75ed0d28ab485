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

#include "mvrisk/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "mvrisk/error.hpp"

namespace mvrisk {

BinnedGrid bin_hourly(std::span<const Event> events, double los_hours, const FeatureSchema& schema) {
  const std::size_t width = schema.clinical_width();
  BinnedGrid grid;
  grid.hours = stay_hours(los_hours);
  const std::size_t cells = static_cast<std::size_t>(grid.hours) * width;
  grid.values.assign(cells, std::numeric_limits<double>::quiet_NaN());
  grid.mask.assign(cells, 0);

  std::map<std::size_t, std::vector<double>> buckets;
  for (const Event& e : events) {
    const auto col = schema.clinical_index(e.column);
    if (!col) fail(ErrorCode::kIngest, "unknown column '" + e.column + "' in events for patient " + e.patient_id);
    if (!(e.hour >= 0.0 && e.hour < los_hours)) {
      fail(ErrorCode::kIngest, "event hour " + std::to_string(e.hour) + " outside [0, los) for patient " + e.patient_id);
    }
    if (!std::isfinite(e.value)) {
      fail(ErrorCode::kIngest, "non-finite value for column '" + e.column + "', patient " + e.patient_id);
    }
    const auto hour = static_cast<std::size_t>(std::floor(e.hour));
    buckets[hour * width + *col].push_back(e.value);
  }
  for (auto& [cell, vals] : buckets) {
    std::sort(vals.begin(), vals.end());
    const std::size_t m = vals.size();
    grid.values[cell] = m % 2 ? vals[m / 2] : 0.5 * (vals[m / 2 - 1] + vals[m / 2]);
    grid.mask[cell] = 1;
  }
  return grid;
}

HourlyInput forward_fill(const PatientRecord& record, const FeatureSchema& schema, double tslm_cap) {
  HourlyInput in;
  in.hours = record.hours;
  in.width = schema.clinical_width();
  in.tracked = schema.tracked_width();
  in.values.resize(static_cast<std::size_t>(in.hours) * in.width);
  in.tslm.resize(static_cast<std::size_t>(in.hours) * in.tracked);
  in.comorbidities.assign(record.comorbidities.begin(), record.comorbidities.end());

  for (std::size_t j = 0; j < in.width; ++j) {
    const std::size_t slot = schema.tracked_slot(j);
    double last = schema.clinical()[j].reference;
    double age = tslm_cap;
    bool seen = false;
    for (int t = 0; t < in.hours; ++t) {
      if (record.measured(t, j)) {
        last = record.raw(t, j);
        age = 0.0;
        seen = true;
      } else if (seen) {
        age = std::min(age + 1.0, tslm_cap);
      }
      in.values[static_cast<std::size_t>(t) * in.width + j] = last;
      if (slot != FeatureSchema::npos) in.tslm[static_cast<std::size_t>(t) * in.tracked + slot] = age;
    }
  }
  return in;
}

nlohmann::json Standardizer::to_json() const { return {{"mean", mean}, {"stddev", stddev}}; }

Standardizer Standardizer::from_json(const nlohmann::json& doc) {
  Standardizer s;
  s.mean = doc.at("mean").get<std::vector<double>>();
  s.stddev = doc.at("stddev").get<std::vector<double>>();
  if (s.mean.size() != s.stddev.size()) fail(ErrorCode::kConfig, "standardizer mean/stddev length mismatch");
  return s;
}

Standardizer fit_standardizer(std::span<const PatientRecord* const> train, const FeatureSchema& schema) {
  const std::size_t width = schema.clinical_width();
  std::vector<double> sum(width, 0.0);
  std::vector<std::size_t> count(width, 0);
  for (const PatientRecord* r : train) {
    if (r->partition != Partition::kTrain) {
      fail(ErrorCode::kUsage, "standardizer fit on non-training patient " + r->patient_id);
    }
    for (int t = 0; t < r->hours; ++t) {
      for (std::size_t j = 0; j < width; ++j) {
        if (r->measured(t, j)) {
          sum[j] += r->raw(t, j);
          ++count[j];
        }
      }
    }
  }
  Standardizer s;
  s.mean.assign(width, 0.0);
  s.stddev.assign(width, 1.0);
  for (std::size_t j = 0; j < width; ++j) {
    s.mean[j] = count[j] ? sum[j] / static_cast<double>(count[j]) : schema.clinical()[j].reference;
  }
  std::vector<double> ss(width, 0.0);
  for (const PatientRecord* r : train) {
    for (int t = 0; t < r->hours; ++t) {
      for (std::size_t j = 0; j < width; ++j) {
        if (r->measured(t, j)) {
          const double d = r->raw(t, j) - s.mean[j];
          ss[j] += d * d;
        }
      }
    }
  }
  for (std::size_t j = 0; j < width; ++j) {
    const double sd = count[j] ? std::sqrt(ss[j] / static_cast<double>(count[j])) : 1.0;
    s.stddev[j] = std::max(sd, kStdFloor);
  }
  return s;
}

Standardizer fit_standardizer(std::span<const PatientRecord> train, const FeatureSchema& schema) {
  std::vector<const PatientRecord*> ptrs;
  ptrs.reserve(train.size());
  for (const PatientRecord& r : train) ptrs.push_back(&r);
  return fit_standardizer(std::span<const PatientRecord* const>(ptrs), schema);
}

void apply_standardizer(HourlyInput& input, const Standardizer& s) {
  if (input.standardized) fail(ErrorCode::kUsage, "apply_standardizer called twice on the same input");
  if (s.mean.size() != input.width) fail(ErrorCode::kShape, "standardizer width does not match input width");
  for (int t = 0; t < input.hours; ++t) {
    double* row = input.values.data() + static_cast<std::size_t>(t) * input.width;
    for (std::size_t j = 0; j < input.width; ++j) row[j] = (row[j] - s.mean[j]) / s.stddev[j];
  }
  input.standardized = true;
}

double WindowBatch::clinical(std::size_t row, std::size_t col, const FeatureSchema& schema) const {
  const std::size_t slot = schema.tracked_slot(col);
  if (slot != FeatureSchema::npos) return tracked.at(row, slot);
  const auto& un = schema.untracked();
  const std::size_t u = static_cast<std::size_t>(std::lower_bound(un.begin(), un.end(), col) - un.begin());
  return untracked.at(row, u);
}

void WindowBatch::set_clinical(std::size_t row, std::size_t col, double value, const FeatureSchema& schema) {
  const std::size_t slot = schema.tracked_slot(col);
  if (slot != FeatureSchema::npos) {
    tracked.at(row, slot) = value;
    return;
  }
  const auto& un = schema.untracked();
  const std::size_t u = static_cast<std::size_t>(std::lower_bound(un.begin(), un.end(), col) - un.begin());
  untracked.at(row, u) = value;
}

WindowBatch gather_windows(std::span<const HourlyInput> inputs, std::span<const WindowRef> refs,
                           const FeatureSchema& schema) {
  const std::size_t n = refs.size();
  if (n == 0) fail(ErrorCode::kUsage, "gather_windows: empty window list");
  const auto& tracked_idx = schema.tslm_tracked();
  const auto& untracked_idx = schema.untracked();
  const std::size_t T = tracked_idx.size(), U = untracked_idx.size(), M = schema.comorbidity_width();
  WindowBatch b;
  b.rows = n;
  // Zero-width blocks are represented with a single dummy column of zeros.
  b.tracked = num::Tensor({n, std::max<std::size_t>(T, 1)});
  b.untracked = num::Tensor({n, std::max<std::size_t>(U, 1)});
  b.tslm = num::Tensor({n, std::max<std::size_t>(T, 1)});
  b.comorbidities = num::Tensor({n, std::max<std::size_t>(M, 1)});
  for (std::size_t r = 0; r < n; ++r) {
    const HourlyInput& in = inputs[refs[r].patient];
    if (!in.standardized) fail(ErrorCode::kUsage, "gather_windows requires standardized inputs");
    const int t = refs[r].hour;
    const double* row = in.values.data() + static_cast<std::size_t>(t) * in.width;
    for (std::size_t k = 0; k < T; ++k) b.tracked.at(r, k) = row[tracked_idx[k]];
    for (std::size_t k = 0; k < U; ++k) b.untracked.at(r, k) = row[untracked_idx[k]];
    const double* age = in.tslm.data() + static_cast<std::size_t>(t) * in.tracked;
    for (std::size_t k = 0; k < T; ++k) b.tslm.at(r, k) = age[k];
    for (std::size_t k = 0; k < M; ++k) b.comorbidities.at(r, k) = in.comorbidities[k];
  }
  return b;
}

void write_features_csv(const std::string& path, std::span<const PatientRecord> records,
                        std::span<const HourlyInput> inputs, const FeatureSchema& schema) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::kIo, "cannot write " + path);
  os << "patient_id,hour,column,value,tslm\n";
  char buf[64];
  for (std::size_t p = 0; p < records.size(); ++p) {
    const HourlyInput& in = inputs[p];
    for (int t = 0; t < in.hours; ++t) {
      for (std::size_t j = 0; j < in.width; ++j) {
        auto res = std::to_chars(buf, buf + sizeof buf, in.value(t, j));
        os << records[p].patient_id << ',' << t << ',' << schema.clinical()[j].name << ','
           << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << ',';
        const std::size_t slot = schema.tracked_slot(j);
        if (slot != FeatureSchema::npos) os << in.tslm_at(t, slot);
        os << '\n';
      }
    }
  }
}

}  // namespace mvrisk
