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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "mvrisk/cohort.hpp"
#include "mvrisk/error.hpp"
#include "mvrisk/synth.hpp"

namespace mvrisk {
namespace {

const FeatureSchema& schema() {
  static const FeatureSchema s = FeatureSchema::default_schema();
  return s;
}

PatientRecord blank(int hours) { return PatientRecord("p", hours, schema()); }

TEST(Schema, DefaultWidths) {
  const FeatureSchema& s = schema();
  EXPECT_EQ(s.clinical_width(), 67u);
  EXPECT_EQ(s.comorbidity_width(), 62u);
  EXPECT_EQ(s.tracked_width(), 50u);
  std::size_t counts[4] = {0, 0, 0, 0};
  for (const ClinicalColumn& c : s.clinical()) ++counts[static_cast<int>(c.group)];
  EXPECT_EQ(counts[0], 8u);
  EXPECT_EQ(counts[1], 42u);
  EXPECT_EQ(counts[2], 6u);
  EXPECT_EQ(counts[3], 11u);
  for (std::size_t j : s.tslm_tracked()) {
    const FeatureGroup g = s.clinical()[j].group;
    EXPECT_TRUE(g == FeatureGroup::kVital || g == FeatureGroup::kLab);
  }
}

TEST(Schema, JsonRoundTripKeepsHash) {
  const FeatureSchema back = FeatureSchema::from_json(schema().to_json());
  EXPECT_EQ(back.hash(), schema().hash());
  EXPECT_EQ(back.clinical_width(), 67u);
}

TEST(Schema, TrackedDemographicRejected) {
  std::vector<ClinicalColumn> cols = {{"fio2", FeatureGroup::kVital, 0.21, 0.1},
                                      {"peep", FeatureGroup::kVital, 5.0, 2.0},
                                      {"age", FeatureGroup::kDemographic, 60.0, 15.0}};
  FeatureSchema s(cols, {"copd"}, {"fio2", "age"}, "fio2", "peep");
  EXPECT_THROW(s.validate(), Error);
}

TEST(Schema, MissingPeepColumnIsConfigError) {
  std::vector<ClinicalColumn> cols = {{"fio2", FeatureGroup::kVital, 0.21, 0.1}};
  try {
    FeatureSchema s(cols, {}, {"fio2"}, "fio2", "peep");
    s.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(Onset, FirstSimultaneousRecording) {
  PatientRecord r = blank(30);
  const std::size_t f = schema().fio2_index(), p = schema().peep_index();
  r.set(10, f, 0.5);
  r.set(12, p, 5.0);
  r.set(15, f, 0.6);
  r.set(15, p, 8.0);
  EXPECT_EQ(derive_mv_onset(r, schema()), 15);
}

TEST(Onset, NeverTogether) {
  PatientRecord r = blank(30);
  r.set(3, schema().fio2_index(), 0.4);
  r.set(4, schema().peep_index(), 5.0);
  EXPECT_FALSE(derive_mv_onset(r, schema()).has_value());
}

TEST(Onset, EarliestOfSeveral) {
  PatientRecord r = blank(30);
  for (int h : {4, 9}) {
    r.set(h, schema().fio2_index(), 0.4);
    r.set(h, schema().peep_index(), 5.0);
  }
  EXPECT_EQ(derive_mv_onset(r, schema()), 4);
}

TEST(Onset, MatchesLinearScanOnRandomPatterns) {
  std::mt19937_64 rng(17);
  std::bernoulli_distribution coin(0.15);
  for (int trial = 0; trial < 200; ++trial) {
    PatientRecord r = blank(40);
    for (int h = 0; h < 40; ++h) {
      if (coin(rng)) r.set(h, schema().fio2_index(), 0.5);
      if (coin(rng)) r.set(h, schema().peep_index(), 5.0);
    }
    std::optional<int> expect;
    for (int h = 0; h < 40 && !expect; ++h) {
      if (r.measured(h, schema().fio2_index()) && r.measured(h, schema().peep_index())) expect = h;
    }
    EXPECT_EQ(derive_mv_onset(r, schema()), expect);
  }
}

OutcomeRecord outcome(double los, std::optional<int> onset = std::nullopt, double duration = 0.0,
                      bool died = false, bool niv = false) {
  OutcomeRecord o;
  o.los_hours = los;
  o.mv_onset_hour = onset;
  if (onset) o.mv_duration_hours = duration;
  o.died_inpatient = died;
  o.noninvasive_mv = niv;
  return o;
}

TEST(Exclusion, Examples) {
  EXPECT_EQ(exclude(outcome(3.0)), ExclusionReason::kShortStay);
  EXPECT_EQ(exclude(outcome(500.0)), ExclusionReason::kLongStay);
  EXPECT_EQ(exclude(outcome(100.0, 2, 10.0)), ExclusionReason::kEarlyMv);
  EXPECT_EQ(exclude(outcome(100.0, 16, 10.0, false, true)), ExclusionReason::kNoninvasiveMv);
  EXPECT_FALSE(exclude(outcome(100.0, 16, 10.0)).has_value());
}

TEST(Exclusion, Boundaries) {
  EXPECT_FALSE(exclude(outcome(4.0)).has_value());
  EXPECT_FALSE(exclude(outcome(480.0)).has_value());
  EXPECT_EQ(exclude(outcome(480.5)), ExclusionReason::kLongStay);
  EXPECT_FALSE(exclude(outcome(100.0, 4, 10.0)).has_value());
  EXPECT_EQ(exclude(outcome(100.0, 3, 10.0)), ExclusionReason::kEarlyMv);
}

TEST(Exclusion, IsPure) {
  const OutcomeRecord o = outcome(3.0);
  EXPECT_EQ(exclude(o), exclude(o));
}

TEST(Composite, Examples) {
  EXPECT_EQ(composite_label(outcome(50.0)), 0);
  EXPECT_EQ(composite_label(outcome(50.0, 10, 10.0)), 1);
  EXPECT_EQ(composite_label(outcome(80.0, 10, 48.0)), 2);
  EXPECT_EQ(composite_label(outcome(50.0, 10, 10.0, true)), 2);
  EXPECT_EQ(composite_label(outcome(80.0, 10, 24.0)), 1);
  EXPECT_EQ(composite_label(outcome(80.0, 10, 24.5)), 2);
  EXPECT_EQ(composite_label(outcome(50.0, std::nullopt, 0.0, true)), 0);
}

PatientRecord labeled(int los, std::optional<int> onset, double duration, bool died = false) {
  PatientRecord r = blank(los);
  r.outcome = outcome(los, onset, duration, died);
  return r;
}

TEST(WindowLabels, Nonventilated) {
  const auto labels = window_labels(labeled(50, std::nullopt, 0.0));
  ASSERT_EQ(labels.size(), 50u);
  for (int h = 0; h < 50; ++h) {
    EXPECT_EQ(labels[h].evaluable, h >= 4) << h;
    EXPECT_EQ(labels[h].target, 0.0);
  }
}

TEST(WindowLabels, EarlyOnsetComposite1) {
  const auto labels = window_labels(labeled(60, 16, 10.0));
  for (int h = 0; h < 60; ++h) {
    if (h < 4) {
      EXPECT_FALSE(labels[h].evaluable);
    } else if (h < 16) {
      EXPECT_TRUE(labels[h].evaluable);
      EXPECT_EQ(labels[h].target, 1.0) << h;
    } else {
      EXPECT_FALSE(labels[h].evaluable) << h;
    }
  }
}

TEST(WindowLabels, LateOnsetComposite2) {
  const auto labels = window_labels(labeled(100, 40, 48.0));
  for (int h = 4; h < 16; ++h) {
    EXPECT_TRUE(labels[h].evaluable);
    EXPECT_EQ(labels[h].target, 0.0) << h;
  }
  for (int h = 16; h < 40; ++h) {
    EXPECT_TRUE(labels[h].evaluable);
    EXPECT_EQ(labels[h].target, 2.0) << h;
  }
  for (int h = 40; h < 100; ++h) EXPECT_FALSE(labels[h].evaluable);
}

TEST(WindowLabels, NonzeroCountRule) {
  for (int onset = 4; onset < 80; onset += 3) {
    for (int horizon : {6, 12, 24}) {
      const auto labels = window_labels(labeled(120, onset, 30.0), horizon);
      int nonzero = 0;
      for (int h = 0; h < 120; ++h) {
        if (labels[h].target != 0.0) ++nonzero;
        if (h >= onset) EXPECT_FALSE(labels[h].evaluable);
      }
      EXPECT_EQ(nonzero, std::min(horizon, onset - 4)) << onset << " " << horizon;
    }
  }
}

std::vector<PatientRecord> simple_patients(std::size_t n, double vent_fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution vent(vent_fraction);
  std::vector<PatientRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    PatientRecord r("p" + std::to_string(i), 50, schema());
    r.outcome = vent(rng) ? outcome(50, 20, 10.0) : outcome(50);
    out.push_back(std::move(r));
  }
  return out;
}

TEST(Split, TenPatients) {
  const auto patients = simple_patients(10, 0.3, 1);
  const CohortSplit s = split_cohort(patients, 0.8, 0.1, 42);
  EXPECT_EQ(s.train.size() + s.validation.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
  std::set<std::size_t> all;
  for (const auto* part : {&s.train, &s.validation, &s.test}) all.insert(part->begin(), part->end());
  EXPECT_EQ(all.size(), 10u);
}

TEST(Split, TooFewPatients) {
  try {
    split_cohort(simple_patients(9, 0.3, 1), 0.8, 0.1, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
  }
}

TEST(Split, DeterministicDisjointAndStratified) {
  const auto patients = simple_patients(1000, 0.1926, 5);
  const CohortSplit a = split_cohort(patients, 0.8, 0.1, 99);
  const CohortSplit b = split_cohort(patients, 0.8, 0.1, 99);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);
  std::vector<int> owner(patients.size(), 0);
  for (const auto* part : {&a.train, &a.validation, &a.test}) {
    for (std::size_t i : *part) ++owner[i];
  }
  for (int o : owner) EXPECT_EQ(o, 1);
  double overall = 0.0;
  for (const auto& p : patients) overall += p.outcome.ventilated() ? 1.0 : 0.0;
  overall /= static_cast<double>(patients.size());
  for (const auto* part : {&a.train, &a.validation, &a.test}) {
    double v = 0.0;
    for (std::size_t i : *part) v += patients[i].outcome.ventilated() ? 1.0 : 0.0;
    EXPECT_NEAR(v / static_cast<double>(part->size()), overall, 0.03);
  }
  EXPECT_NEAR(overall, 0.1926, 0.04);
}

TEST(Split, TagPartitions) {
  auto patients = simple_patients(20, 0.3, 2);
  tag_partitions(patients, split_cohort(patients, 0.8, 0.1, 3));
  for (const auto& p : patients) EXPECT_NE(p.partition, Partition::kUnassigned);
}

TEST(Synth, DeterministicPerSeed) {
  SynthConfig c;
  c.n_patients = 40;
  c.seed = 8;
  const Cohort a = generate_synthetic(c);
  const Cohort b = generate_synthetic(c);
  ASSERT_EQ(a.patients.size(), b.patients.size());
  for (std::size_t i = 0; i < a.patients.size(); ++i) {
    const auto& x = a.patients[i];
    const auto& y = b.patients[i];
    EXPECT_EQ(x.patient_id, y.patient_id);
    EXPECT_EQ(x.measured_mask, y.measured_mask);
    EXPECT_EQ(x.comorbidities, y.comorbidities);
    ASSERT_EQ(x.raw_grid.size(), y.raw_grid.size());
    for (std::size_t k = 0; k < x.raw_grid.size(); ++k) {
      if (std::isnan(x.raw_grid[k])) {
        EXPECT_TRUE(std::isnan(y.raw_grid[k]));
      } else {
        EXPECT_EQ(x.raw_grid[k], y.raw_grid[k]);
      }
    }
  }
}

TEST(Synth, VentilatedCountWithinBinomialInterval) {
  SynthConfig c;
  c.n_patients = 10000;
  c.seed = 3;
  const Cohort cohort = generate_synthetic(c);
  std::size_t vent = 0;
  std::vector<double> onsets;
  for (const auto& p : cohort.patients) {
    if (p.outcome.ventilated()) {
      ++vent;
      onsets.push_back(*p.outcome.mv_onset_hour);
    }
  }
  // 99% interval: 1926 +- 2.576 * sqrt(10000 * 0.1926 * 0.8074).
  const double half = 2.576 * std::sqrt(10000 * 0.1926 * 0.8074);
  EXPECT_NEAR(static_cast<double>(vent), 1926.0, half);
  std::sort(onsets.begin(), onsets.end());
  const double median = onsets[onsets.size() / 2];
  EXPECT_GE(median, 8.0);
  EXPECT_LE(median, 41.0);
  EXPECT_NEAR(median, 16.0, 3.0);
}

TEST(Synth, RecordsPassExclusionAndOnsetDerivation) {
  SynthConfig c;
  c.n_patients = 300;
  c.seed = 12;
  const Cohort cohort = generate_synthetic(c);
  for (const auto& p : cohort.patients) {
    EXPECT_FALSE(exclude(p.outcome).has_value()) << p.patient_id;
    EXPECT_EQ(derive_mv_onset(p, cohort.schema), p.outcome.mv_onset_hour) << p.patient_id;
    EXPECT_NO_THROW(p.validate(cohort.schema));
  }
}

TEST(Synth, InfeasibleConfigRejected) {
  SynthConfig c;
  c.onset = {100.0, 80.0, 120.0};
  EXPECT_THROW(c.validate(), Error);
  SynthConfig d;
  d.ventilated_fraction = 1.5;
  EXPECT_THROW(d.validate(), Error);
}

TEST(Synth, OxygenationDeterioratesBeforeOnset) {
  SynthConfig c;
  c.n_patients = 2000;
  c.seed = 4;
  const Cohort cohort = generate_synthetic(c);
  const std::size_t o2 = *cohort.schema.clinical_index("o2sat");
  double early = 0.0, late = 0.0;
  std::size_t n_early = 0, n_late = 0;
  for (const auto& p : cohort.patients) {
    if (!p.outcome.ventilated() || *p.outcome.mv_onset_hour < 30) continue;
    const int onset = *p.outcome.mv_onset_hour;
    for (int h = 0; h < onset; ++h) {
      if (!p.measured(h, o2)) continue;
      if (h < onset - 24) {
        early += p.raw(h, o2);
        ++n_early;
      } else if (h >= onset - 4) {
        late += p.raw(h, o2);
        ++n_late;
      }
    }
  }
  ASSERT_GT(n_early, 0u);
  ASSERT_GT(n_late, 0u);
  EXPECT_LT(late / static_cast<double>(n_late), early / static_cast<double>(n_early) - 1.0);
}

}  // namespace
}  // namespace mvrisk
