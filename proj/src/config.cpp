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

#include "mvrisk/config.hpp"

#include <filesystem>
#include <fstream>
#include <vector>

#include "mvrisk/error.hpp"

namespace mvrisk {
namespace {

bool compatible(const nlohmann::json& want, const nlohmann::json& got) {
  if (want.is_number_float()) return got.is_number();
  if (want.is_number_unsigned()) return got.is_number_unsigned() || (got.is_number_integer() && got.get<long long>() >= 0);
  if (want.is_number_integer()) return got.is_number_integer();
  if (want.is_boolean()) return got.is_boolean();
  if (want.is_string()) return got.is_string();
  if (want.is_array()) return got.is_array();
  if (want.is_object()) return got.is_object();
  return false;
}

std::string type_name(const nlohmann::json& j) {
  if (j.is_number_float()) return "number";
  if (j.is_number_unsigned()) return "non-negative integer";
  if (j.is_number_integer()) return "integer";
  return j.type_name();
}

void merge_at(nlohmann::json& base, const nlohmann::json& doc, const std::string& prefix) {
  if (!doc.is_object()) fail(ErrorCode::kConfig, (prefix.empty() ? "config" : prefix) + " must be an object");
  for (const auto& [key, value] : doc.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) fail(ErrorCode::kConfig, "unknown config key '" + path + "'");
    nlohmann::json& slot = base[key];
    // Free-form maps take their value whole.
    if (path == "synth.column_plans") {
      if (!value.is_object()) fail(ErrorCode::kConfig, "synth.column_plans must be an object");
      slot = value;
      continue;
    }
    if (slot.is_object()) {
      merge_at(slot, value, path);
      continue;
    }
    if (!compatible(slot, value)) {
      fail(ErrorCode::kConfig, "config key '" + path + "' expects " + type_name(slot) + ", got " + type_name(value));
    }
    slot = value.is_number_integer() && slot.is_number_float() ? nlohmann::json(value.get<double>()) : value;
  }
}

}  // namespace

std::string RunConfig::patients_file() const {
  if (!patients_path.empty()) return patients_path;
  if (!data_dir.empty()) return data_dir + "/patients.csv";
  fail(ErrorCode::kConfig, "no cohort given: set data.dir or data.patients");
}

std::string RunConfig::events_file() const {
  if (!events_path.empty()) return events_path;
  if (!data_dir.empty()) return data_dir + "/events.csv";
  fail(ErrorCode::kConfig, "no cohort given: set data.dir or data.events");
}

nlohmann::json default_run_config_json() {
  nlohmann::json synth = synth_config_to_json(SynthConfig{});
  synth.erase("seed");
  nlohmann::json train = TrainConfig{}.to_json();
  train.erase("seed");
  const EvalSettings ev;
  const HeatmapSettings hm;
  return {{"seed", 0},
          {"threads", 1},
          {"out", "out"},
          {"schema", ""},
          {"data", {{"dir", ""}, {"patients", ""}, {"events", ""}}},
          {"synth", synth},
          {"model", ModelConfig{}.to_json()},
          {"train", train},
          {"eval",
           {{"silence_hours", ev.silence_hours},
            {"target_sensitivity", ev.target_sensitivity},
            {"horizon_hours", 24},
            {"partition", "test"}}},
          {"explain", {{"hours_before", hm.hours_before}, {"top_k", hm.top_k}, {"rows", hm.rows}}},
          {"features", {{"tslm_cap", kDefaultTslmCap}, {"dump", false}}}};
}

void merge_run_config(nlohmann::json& base, const nlohmann::json& doc) { merge_at(base, doc, ""); }

void apply_override(nlohmann::json& doc, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    fail(ErrorCode::kConfig, "override '" + std::string(assignment) + "' must look like key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    parts.push_back(key.substr(start, dot == std::string::npos ? std::string::npos : dot - start));
    if (parts.back().empty()) fail(ErrorCode::kConfig, "malformed override key '" + key + "'");
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  nlohmann::json patch = value;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = nlohmann::json{{*it, patch}};
  merge_run_config(doc, patch);
}

RunConfig parse_run_config(const nlohmann::json& doc) {
  nlohmann::json full = default_run_config_json();
  merge_run_config(full, doc);
  RunConfig c;
  if (full["seed"].get<long long>() < 0) fail(ErrorCode::kConfig, "seed must be >= 0");
  c.seed = full["seed"].get<std::uint64_t>();
  if (full["threads"].get<long long>() < 1) fail(ErrorCode::kConfig, "threads must be >= 1");
  c.threads = full["threads"].get<std::size_t>();
  c.out = full["out"].get<std::string>();
  if (c.out.empty()) fail(ErrorCode::kConfig, "out must name a directory");
  c.schema_path = full["schema"].get<std::string>();
  c.data_dir = full["data"]["dir"].get<std::string>();
  c.patients_path = full["data"]["patients"].get<std::string>();
  c.events_path = full["data"]["events"].get<std::string>();

  nlohmann::json synth = full["synth"];
  synth["seed"] = c.seed;
  c.synth = synth_config_from_json(synth);
  c.model = ModelConfig::from_json(full["model"]);
  nlohmann::json train = full["train"];
  train["seed"] = c.seed;
  c.train = TrainConfig::from_json(train);
  c.train.threads = c.threads;

  const nlohmann::json& ev = full["eval"];
  c.eval.silence_hours = ev["silence_hours"].get<int>();
  if (c.eval.silence_hours < 0) fail(ErrorCode::kConfig, "eval.silence_hours must be >= 0");
  c.eval.target_sensitivity = ev["target_sensitivity"].get<double>();
  if (!(c.eval.target_sensitivity > 0.0 && c.eval.target_sensitivity <= 1.0)) {
    fail(ErrorCode::kConfig, "eval.target_sensitivity must lie in (0, 1]");
  }
  c.horizon_hours = ev["horizon_hours"].get<int>();
  if (c.horizon_hours < 1) fail(ErrorCode::kConfig, "eval.horizon_hours must be >= 1");
  c.eval_partition = ev["partition"].get<std::string>();
  if (c.eval_partition != "test" && c.eval_partition != "all") {
    fail(ErrorCode::kConfig, "eval.partition must be 'test' or 'all'");
  }
  const nlohmann::json& ex = full["explain"];
  c.explain.hours_before = ex["hours_before"].get<int>();
  c.explain.top_k = ex["top_k"].get<std::size_t>();
  c.explain.rows = ex["rows"].get<std::size_t>();
  if (c.explain.hours_before < 1 || c.explain.top_k < 1 || c.explain.rows < 1) {
    fail(ErrorCode::kConfig, "explain.hours_before, explain.top_k and explain.rows must be >= 1");
  }
  c.tslm_cap = full["features"]["tslm_cap"].get<double>();
  if (!(c.tslm_cap > 0.0)) fail(ErrorCode::kConfig, "features.tslm_cap must be positive");
  c.dump_features = full["features"]["dump"].get<bool>();
  return c;
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::kIo, "cannot read " + path);
  nlohmann::json doc = nlohmann::json::parse(is, nullptr, false);
  if (doc.is_discarded()) fail(ErrorCode::kConfig, path + " is not valid JSON");
  return doc;
}

}  // namespace mvrisk
