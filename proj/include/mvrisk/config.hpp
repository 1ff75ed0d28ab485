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

#ifndef MVRISK_CONFIG_HPP_
#define MVRISK_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "mvrisk/eval.hpp"
#include "mvrisk/explain.hpp"
#include "mvrisk/model.hpp"
#include "mvrisk/synth.hpp"
#include "mvrisk/train.hpp"

namespace mvrisk {

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out = "out";
  std::string schema_path;  // empty: data_dir/schema.json if present, else the built-in schema
  std::string data_dir;
  std::string patients_path;
  std::string events_path;
  SynthConfig synth;
  ModelConfig model;
  TrainConfig train;
  EvalSettings eval;
  int horizon_hours = 24;
  std::string eval_partition = "test";
  HeatmapSettings explain;
  double tslm_cap = kDefaultTslmCap;
  bool dump_features = false;

  std::string patients_file() const;
  std::string events_file() const;
};

// Every accepted key with its default value.
nlohmann::json default_run_config_json();

// Merges `doc` over the defaults; unknown keys and type mismatches are errors.
void merge_run_config(nlohmann::json& base, const nlohmann::json& doc);

// Applies one dotted `key=value` override. Values parse as JSON, falling back
// to a plain string.
void apply_override(nlohmann::json& doc, std::string_view assignment);

RunConfig parse_run_config(const nlohmann::json& doc);

nlohmann::json load_json_file(const std::string& path);

}  // namespace mvrisk

#endif  // MVRISK_CONFIG_HPP_
