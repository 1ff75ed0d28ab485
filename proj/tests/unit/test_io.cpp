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
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "mvrisk/checkpoint.hpp"
#include "mvrisk/cohort_io.hpp"
#include "mvrisk/config.hpp"
#include "mvrisk/error.hpp"

namespace mvrisk {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return static_cast<ErrorCode>(0);
}

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Cohort small_cohort(std::size_t n, std::uint64_t seed) {
  SynthConfig sc;
  sc.n_patients = n;
  sc.seed = seed;
  return generate_synthetic(sc);
}

TEST(FormatDouble, RoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, 97.25, -2.5e-7, 1e300, 0.0}) EXPECT_EQ(std::stod(format_double(x)), x);
  EXPECT_EQ(format_double(2.0), "2");
}

TEST(CohortIo, RoundTripIsExact) {
  const Cohort a = small_cohort(40, 3);
  const std::string dir = testing::temp_dir("cohort_rt");
  write_cohort(dir, a);
  IngestReport rep;
  const FeatureSchema schema = read_schema(dir + "/schema.json");
  EXPECT_EQ(schema.hash(), a.schema.hash());
  const Cohort b = read_cohort(schema, dir + "/patients.csv", dir + "/events.csv", &rep);
  EXPECT_EQ(rep.patients_read, 40u);
  EXPECT_EQ(rep.patients_kept, 40u);
  ASSERT_EQ(b.patients.size(), a.patients.size());
  for (std::size_t i = 0; i < a.patients.size(); ++i) {
    const PatientRecord& x = a.patients[i];
    const PatientRecord& y = b.patients[i];
    EXPECT_EQ(x.patient_id, y.patient_id);
    EXPECT_EQ(x.hours, y.hours);
    EXPECT_EQ(x.measured_mask, y.measured_mask);
    EXPECT_EQ(x.comorbidities, y.comorbidities);
    EXPECT_EQ(x.outcome.mv_onset_hour, y.outcome.mv_onset_hour);
    EXPECT_EQ(x.outcome.los_hours, y.outcome.los_hours);
    for (int t = 0; t < x.hours; ++t) {
      for (std::size_t j = 0; j < x.width; ++j) {
        if (x.measured(t, j)) EXPECT_EQ(x.raw(t, j), y.raw(t, j));
      }
    }
  }
  const std::string dir2 = testing::temp_dir("cohort_rt2");
  write_cohort(dir2, b);
  EXPECT_EQ(slurp(dir + "/events.csv"), slurp(dir2 + "/events.csv"));
  EXPECT_EQ(slurp(dir + "/patients.csv"), slurp(dir2 + "/patients.csv"));
}

TEST(CohortIo, OnsetMismatchRejected) {
  Cohort a = small_cohort(30, 4);
  for (auto& p : a.patients) {
    if (p.outcome.mv_onset_hour) {
      p.outcome.mv_onset_hour = *p.outcome.mv_onset_hour + 1;
      break;
    }
  }
  const std::string dir = testing::temp_dir("cohort_bad_onset");
  write_cohort(dir, a);
  EXPECT_EQ(code_of([&] { read_cohort(a.schema, dir + "/patients.csv", dir + "/events.csv"); }), ErrorCode::kIngest);
}

TEST(CohortIo, MalformedInputs) {
  const Cohort a = small_cohort(5, 5);
  const std::string dir = testing::temp_dir("cohort_bad");
  write_cohort(dir, a);
  {
    std::ofstream os(dir + "/events.csv", std::ios::app);
    os << "nobody,1,fio2,0.4\n";
  }
  EXPECT_EQ(code_of([&] { read_cohort(a.schema, dir + "/patients.csv", dir + "/events.csv"); }), ErrorCode::kIngest);
  EXPECT_EQ(code_of([&] { read_cohort(a.schema, dir + "/missing.csv", dir + "/events.csv"); }), ErrorCode::kIo);
  {
    std::ofstream os(dir + "/events.csv");
    os << "patient_id,hour,column_name,value\n" << a.patients[0].patient_id << ",1,fio2,abc\n";
  }
  EXPECT_EQ(code_of([&] { read_cohort(a.schema, dir + "/patients.csv", dir + "/events.csv"); }), ErrorCode::kIngest);
}

TEST(CohortIo, ExclusionsCounted) {
  Cohort a = small_cohort(10, 6);
  a.patients[0].outcome.noninvasive_mv = true;
  const std::string dir = testing::temp_dir("cohort_excl");
  write_cohort(dir, a);
  IngestReport rep;
  const Cohort b = read_cohort(a.schema, dir + "/patients.csv", dir + "/events.csv", &rep);
  EXPECT_EQ(b.patients.size(), 9u);
  EXPECT_EQ(rep.excluded.at(std::string(exclusion_name(ExclusionReason::kNoninvasiveMv))), 1u);
}

TEST(Config, DefaultsParse) {
  const RunConfig c = parse_run_config(nlohmann::json::object());
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.eval.silence_hours, 6);
  EXPECT_EQ(c.eval.target_sensitivity, 0.80);
  EXPECT_EQ(c.explain.top_k, 3u);
  EXPECT_EQ(c.horizon_hours, 24);
}

TEST(Config, OverridesApply) {
  nlohmann::json doc = default_run_config_json();
  apply_override(doc, "train.epochs=7");
  apply_override(doc, "model.variant=ffnn_sa");
  apply_override(doc, "seed=11");
  apply_override(doc, "eval.silence_hours=0");
  const RunConfig c = parse_run_config(doc);
  EXPECT_EQ(c.train.epochs, 7u);
  EXPECT_EQ(c.model.variant, Variant::kFfnnSa);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.synth.seed, 11u);
  EXPECT_EQ(c.eval.silence_hours, 0);
}

TEST(Config, BadOverridesRejected) {
  nlohmann::json doc = default_run_config_json();
  for (const char* bad : {"train.epochz=3", "noequals", "=3", "train..epochs=3", ".seed=1", "seed.=1",
                          "train.epochs=\"x\"", "model=3"}) {
    EXPECT_EQ(code_of([&] { apply_override(doc, bad); }), ErrorCode::kConfig) << bad;
  }
  EXPECT_EQ(code_of([&] { merge_run_config(doc, {{"unknown", 1}}); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([&] { parse_run_config({{"threads", 0}}); }), ErrorCode::kConfig);
}

TEST(Config, FileErrors) {
  const std::string dir = testing::temp_dir("config_files");
  EXPECT_EQ(code_of([&] { load_json_file(dir + "/absent.json"); }), ErrorCode::kIo);
  {
    std::ofstream os(dir + "/bad.json");
    os << "{ not json";
  }
  EXPECT_EQ(code_of([&] { load_json_file(dir + "/bad.json"); }), ErrorCode::kConfig);
}

Standardizer train_standardizer(const Cohort& cohort) {
  std::vector<const PatientRecord*> train;
  for (const auto& p : cohort.patients) {
    if (p.partition == Partition::kTrain) train.push_back(&p);
  }
  return fit_standardizer(std::span<const PatientRecord* const>(train), cohort.schema);
}

Checkpoint make_checkpoint(const Dataset& d, const FeatureSchema& schema, const Standardizer& st) {
  ModelConfig mc;
  mc.variant = Variant::kFfnnMha;
  mc.hidden_sizes = {8, 6, 4};
  Checkpoint c;
  c.schema = schema;
  c.model_config = mc;
  c.standardizer = st;
  c.epoch = 3;
  c.val_auc = 0.7;
  c.parameters = Model(mc, schema, 17).parameters();
  (void)d;
  return c;
}

TEST(Checkpoint, RoundTripPredictsIdentically) {
  Cohort cohort;
  const Dataset d = testing::small_dataset(40, 8, 1.0, &cohort);
  const Standardizer st = train_standardizer(cohort);
  const Checkpoint c = make_checkpoint(d, cohort.schema, st);
  const std::string path = testing::temp_dir("ckpt") + "/model.json";
  save_checkpoint(path, c);
  const Checkpoint back = load_checkpoint(path, &cohort.schema);
  EXPECT_EQ(back.epoch, 3u);
  EXPECT_EQ(back.val_auc, 0.7);
  EXPECT_EQ(back.standardizer.mean, st.mean);
  EXPECT_EQ(back.standardizer.stddev, st.stddev);
  ASSERT_EQ(back.parameters.size(), c.parameters.size());
  for (std::size_t i = 0; i < c.parameters.size(); ++i) {
    EXPECT_EQ(back.parameters[i].name, c.parameters[i].name);
    EXPECT_TRUE(std::ranges::equal(back.parameters[i].value.data(), c.parameters[i].value.data()));
  }
  const auto windows = d.windows(Partition::kTrain);
  const WindowBatch b = gather_windows(d.inputs, std::span<const WindowRef>(windows).first(50), cohort.schema);
  EXPECT_EQ(c.model().predict(b), back.model().predict(b));
}

TEST(Checkpoint, SchemaMismatchAndCorruption) {
  Cohort cohort;
  const Dataset d = testing::small_dataset(20, 9, 1.0, &cohort);
  const Standardizer st = train_standardizer(cohort);
  const std::string dir = testing::temp_dir("ckpt_bad");
  save_checkpoint(dir + "/model.json", make_checkpoint(d, cohort.schema, st));
  std::vector<ClinicalColumn> cols = {{"fio2", FeatureGroup::kVital, 0.21, 0.1},
                                      {"peep", FeatureGroup::kVital, 5.0, 2.0}};
  const FeatureSchema other(cols, {}, {"fio2"}, "fio2", "peep");
  EXPECT_EQ(code_of([&] { load_checkpoint(dir + "/model.json", &other); }), ErrorCode::kSchemaMismatch);
  {
    std::ofstream os(dir + "/junk.json");
    os << "[1,2";
  }
  EXPECT_EQ(code_of([&] { load_checkpoint(dir + "/junk.json"); }), ErrorCode::kIo);
  EXPECT_EQ(code_of([&] { load_checkpoint(dir + "/absent.json"); }), ErrorCode::kIo);
}

}  // namespace
}  // namespace mvrisk
