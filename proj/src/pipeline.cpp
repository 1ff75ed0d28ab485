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

#include "mvrisk/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "mvrisk/error.hpp"
#include "mvrisk/gradcheck.hpp"

namespace mvrisk {
namespace {

void ensure_out(const RunConfig& c) {
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create output directory " + c.out + ": " + ec.message());
}

void write_json(const std::string& path, const nlohmann::json& doc) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::kIo, "cannot write " + path);
  os << doc.dump(2) << '\n';
}

FeatureSchema resolve_schema(const RunConfig& c) {
  if (!c.schema_path.empty()) return read_schema(c.schema_path);
  if (!c.data_dir.empty() && std::filesystem::exists(c.data_dir + "/schema.json")) {
    return read_schema(c.data_dir + "/schema.json");
  }
  return FeatureSchema::default_schema();
}

void split_and_tag(Cohort& cohort, const TrainConfig& t) {
  const CohortSplit split = split_cohort(cohort.patients, t.train_fraction, t.validation_fraction, t.seed);
  tag_partitions(cohort.patients, split);
}

std::uint64_t init_seed(std::uint64_t seed) { return seed * 0x9e3779b97f4a7c15ULL + 0x6d76726973ULL; }

}  // namespace

Cohort load_cohort(const RunConfig& c, IngestReport* report) {
  const FeatureSchema schema = resolve_schema(c);
  return read_cohort(schema, c.patients_file(), c.events_file(), report);
}

nlohmann::json run_synth(const RunConfig& c) {
  ensure_out(c);
  const FeatureSchema schema = c.schema_path.empty() ? FeatureSchema::default_schema() : read_schema(c.schema_path);
  const Cohort cohort = generate_synthetic(c.synth, schema);
  write_cohort(c.out, cohort);
  std::size_t vent = 0;
  std::vector<double> onsets;
  for (const PatientRecord& r : cohort.patients) {
    if (r.outcome.mv_onset_hour) {
      ++vent;
      onsets.push_back(*r.outcome.mv_onset_hour);
    }
  }
  std::sort(onsets.begin(), onsets.end());
  double median = 0.0;
  if (!onsets.empty()) {
    const std::size_t k = onsets.size();
    median = k % 2 ? onsets[k / 2] : 0.5 * (onsets[k / 2 - 1] + onsets[k / 2]);
  }
  nlohmann::json summary = {{"patients", cohort.patients.size()},
                            {"ventilated", vent},
                            {"prevalence", cohort.patients.empty() ? 0.0 : static_cast<double>(vent) / static_cast<double>(cohort.patients.size())},
                            {"onset_median_hour", median},
                            {"schema_hash", schema.hash()},
                            {"config", synth_config_to_json(c.synth)}};
  write_json(c.out + "/synth_summary.json", summary);
  return summary;
}

nlohmann::json run_ingest(const RunConfig& c) {
  ensure_out(c);
  IngestReport rep;
  Cohort cohort = load_cohort(c, &rep);
  nlohmann::json excluded = nlohmann::json::object();
  for (const auto& [reason, n] : rep.excluded) excluded[reason] = n;
  std::size_t vent = 0;
  for (const PatientRecord& r : cohort.patients) vent += r.outcome.ventilated() ? 1 : 0;
  nlohmann::json summary = {{"patients_read", rep.patients_read},
                            {"patients_kept", rep.patients_kept},
                            {"ventilated", vent},
                            {"events_read", rep.events_read},
                            {"excluded", excluded},
                            {"schema_hash", cohort.schema.hash()}};
  if (c.dump_features) {
    std::vector<HourlyInput> inputs;
    for (const PatientRecord& r : cohort.patients) inputs.push_back(forward_fill(r, cohort.schema, c.tslm_cap));
    write_features_csv(c.out + "/features.csv", cohort.patients, inputs, cohort.schema);
  }
  write_json(c.out + "/ingest_report.json", summary);
  return summary;
}

nlohmann::json run_train(const RunConfig& c, const std::function<void(const EpochLog&)>& on_epoch) {
  ensure_out(c);
  Cohort cohort = load_cohort(c);
  split_and_tag(cohort, c.train);
  std::vector<const PatientRecord*> train_ptrs;
  for (const PatientRecord& r : cohort.patients) {
    if (r.partition == Partition::kTrain) train_ptrs.push_back(&r);
  }
  const Standardizer standardizer = fit_standardizer(std::span<const PatientRecord* const>(train_ptrs), cohort.schema);
  const Dataset data = prepare_dataset(cohort, standardizer, c.tslm_cap, c.horizon_hours);
  Model initial(c.model, cohort.schema, init_seed(c.seed));
  const std::vector<double> targets = data.targets(data.windows(Partition::kTrain));
  if (!targets.empty()) {
    double total = 0.0;
    for (double t : targets) total += t;
    initial.set_output_prior(total / static_cast<double>(targets.size()));
  }
  TrainResult result = train(initial, data, c.train, c.eval, on_epoch);

  Checkpoint ckpt;
  ckpt.schema = cohort.schema;
  ckpt.model_config = c.model;
  ckpt.train_config = c.train;
  ckpt.standardizer = standardizer;
  ckpt.tslm_cap = c.tslm_cap;
  ckpt.horizon_hours = c.horizon_hours;
  ckpt.epoch = result.best_epoch;
  ckpt.val_auc = result.best_val_auc;
  ckpt.parameters = result.best_parameters;
  save_checkpoint(c.out + "/checkpoint.json", ckpt);
  write_train_log(c.out + "/train_log.csv", result.log);

  nlohmann::json summary = {{"variant", variant_name(c.model.variant)},
                            {"parameters", initial.parameter_count()},
                            {"train_windows", data.windows(Partition::kTrain).size()},
                            {"validation_windows", data.windows(Partition::kValidation).size()},
                            {"epochs", c.train.epochs},
                            {"best_epoch", result.best_epoch},
                            {"best_val_auc", result.best_val_auc},
                            {"final_train_rmse", result.log.back().train_rmse}};
  write_json(c.out + "/train_summary.json", summary);
  return summary;
}

ScoredCohort score_for_eval(const Checkpoint& ckpt, const Cohort& cohort_in, const RunConfig& c, Dataset* out_data) {
  Cohort cohort = cohort_in;
  split_and_tag(cohort, ckpt.train_config);
  Dataset data = prepare_dataset(cohort, ckpt.standardizer, ckpt.tslm_cap, ckpt.horizon_hours);
  if (c.eval_partition == "all") std::fill(data.partitions.begin(), data.partitions.end(), Partition::kTest);
  const Model model = ckpt.model();
  ScoredCohort scored = score_partition(model, data, Partition::kTest, c.threads);
  if (out_data) *out_data = std::move(data);
  return scored;
}

nlohmann::json run_evaluate(const RunConfig& c, const std::string& checkpoint) {
  ensure_out(c);
  const Cohort cohort = load_cohort(c);
  const Checkpoint ckpt = load_checkpoint(checkpoint, &cohort.schema);
  const ScoredCohort scored = score_for_eval(ckpt, cohort, c);
  const EvalReport report = evaluate_scores(scored, c.eval);
  nlohmann::json doc = report_to_json(report, c.eval);
  doc["variant"] = variant_name(ckpt.model_config.variant);
  doc["partition"] = c.eval_partition;
  doc["checkpoint_epoch"] = ckpt.epoch;
  doc["checkpoint_val_auc"] = ckpt.val_auc;
  write_json(c.out + "/report.json", doc);
  write_roc_csv(c.out + "/roc_points.csv", report.roc);
  return doc;
}

nlohmann::json run_compare(const RunConfig& c, const std::string& path_a, const std::string& path_b) {
  ensure_out(c);
  const Cohort cohort = load_cohort(c);
  const Checkpoint a = load_checkpoint(path_a, &cohort.schema);
  const Checkpoint b = load_checkpoint(path_b, &cohort.schema);
  const TrainConfig& ta = a.train_config;
  const TrainConfig& tb = b.train_config;
  if (ta.seed != tb.seed || ta.train_fraction != tb.train_fraction || ta.validation_fraction != tb.validation_fraction ||
      a.horizon_hours != b.horizon_hours) {
    fail(ErrorCode::kConfig, "compare: checkpoints were trained on different splits or horizons");
  }
  const ScoredCohort sa = score_for_eval(a, cohort, c);
  const ScoredCohort sb = score_for_eval(b, cohort, c);
  std::vector<double> pa, pb;
  std::vector<std::uint8_t> la, lb;
  pool(sa, &pa, &la);
  pool(sb, &pb, &lb);
  const DeLongResult d = delong_test(pa, pb, la);
  nlohmann::json doc = {{"model_a", {{"checkpoint", path_a}, {"variant", variant_name(a.model_config.variant)},
                                     {"policy_auc", policy_auc(sa, c.eval.silence_hours)}}},
                        {"model_b", {{"checkpoint", path_b}, {"variant", variant_name(b.model_config.variant)},
                                     {"policy_auc", policy_auc(sb, c.eval.silence_hours)}}},
                        {"windows", pa.size()},
                        {"delong",
                         {{"auc_a", d.auc_a},
                          {"auc_b", d.auc_b},
                          {"variance", d.variance},
                          {"z", d.z},
                          {"p", d.p},
                          {"degenerate", d.degenerate}}}};
  write_json(c.out + "/compare.json", doc);
  return doc;
}

nlohmann::json run_explain(const RunConfig& c, const std::string& checkpoint) {
  ensure_out(c);
  const Cohort cohort = load_cohort(c);
  const Checkpoint ckpt = load_checkpoint(checkpoint, &cohort.schema);
  Dataset data;
  score_for_eval(ckpt, cohort, c, &data);
  const Model model = ckpt.model();
  const int H = c.explain.hours_before;
  std::vector<std::vector<WindowRef>> windows;
  for (std::size_t p = 0; p < data.inputs.size(); ++p) {
    if (data.partitions[p] != Partition::kTest || !data.onsets[p]) continue;
    const int onset = *data.onsets[p];
    if (onset < H + kFirstLabeledHour) continue;
    std::vector<WindowRef> w;
    for (int h = 1; h <= H; ++h) w.push_back({static_cast<std::uint32_t>(p), onset - h});
    windows.push_back(std::move(w));
  }
  const RiskFn risk = [&](const WindowBatch& b) { return model.predict(b, c.threads); };
  const Heatmap map = heatmap(risk, data.inputs, windows, data.schema, c.explain);
  write_heatmap_csv(c.out + "/heatmap.csv", map);
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t v : map.rows) {
    rows.push_back({{"variable", map.variables[v]}, {"mean_abs_relevance", map.mean_abs_relevance[v]}, {"fraction", map.full[v]}});
  }
  nlohmann::json doc = {{"patients", map.patients}, {"hours_before", map.hours}, {"top_k", c.explain.top_k}, {"rows", rows}};
  write_json(c.out + "/explain.json", doc);
  return doc;
}

std::vector<GradCheckLine> run_gradcheck(const RunConfig& c) {
  ensure_out(c);
  std::vector<GradCheckLine> lines;
  for (const num::NamedCheck& n : num::primitive_grad_checks(c.seed)) {
    lines.push_back({"primitive/" + n.name, n.max_rel_error, n.max_rel_error < kGradCheckTolerance});
  }
  for (const num::NamedCheck& n : model_grad_checks(c.seed)) {
    lines.push_back({n.name, n.max_rel_error, n.max_rel_error < kGradCheckTolerance});
  }
  std::ofstream os(c.out + "/gradcheck.csv");
  if (!os) fail(ErrorCode::kIo, "cannot write " + c.out + "/gradcheck.csv");
  os << "check,max_rel_error,passed\n";
  for (const GradCheckLine& l : lines) os << l.name << ',' << format_double(l.max_rel_error) << ',' << (l.passed ? 1 : 0) << '\n';
  return lines;
}

}  // namespace mvrisk
