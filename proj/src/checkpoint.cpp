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

#include "mvrisk/checkpoint.hpp"

#include <fstream>

#include "mvrisk/error.hpp"

namespace mvrisk {

Model Checkpoint::model() const { return Model(model_config, schema, parameters); }

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  nlohmann::json params = nlohmann::json::array();
  for (const NamedParameter& p : c.parameters) {
    std::vector<double> values(p.value.data().begin(), p.value.data().end());
    params.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"values", values}});
  }
  nlohmann::json doc = {{"format", "mvrisk-checkpoint"},
                        {"version", kCheckpointVersion},
                        {"schema_hash", c.schema.hash()},
                        {"schema", c.schema.to_json()},
                        {"model_config", c.model_config.to_json()},
                        {"train_config", c.train_config.to_json()},
                        {"standardizer", c.standardizer.to_json()},
                        {"tslm_cap", c.tslm_cap},
                        {"horizon_hours", c.horizon_hours},
                        {"epoch", c.epoch},
                        {"val_auc", c.val_auc},
                        {"parameters", params}};
  std::ofstream os(path);
  if (!os) fail(ErrorCode::kIo, "cannot write " + path);
  os << doc.dump() << '\n';
  if (!os) fail(ErrorCode::kIo, "write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path, const FeatureSchema* expected) {
  std::ifstream is(path);
  if (!is) fail(ErrorCode::kIo, "cannot read " + path);
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIo, "checkpoint " + path + " is not valid JSON: " + e.what());
  }
  try {
    if (doc.value("format", "") != "mvrisk-checkpoint") fail(ErrorCode::kIo, path + " is not an mvrisk checkpoint");
    if (doc.at("version").get<int>() != kCheckpointVersion) {
      fail(ErrorCode::kIo, path + ": unsupported checkpoint version " + doc.at("version").dump());
    }
    const std::string stored_hash = doc.at("schema_hash").get<std::string>();
    if (expected && expected->hash() != stored_hash) {
      fail(ErrorCode::kSchemaMismatch, "checkpoint schema hash " + stored_hash + " does not match cohort schema hash " +
                                           expected->hash());
    }
    Checkpoint c;
    c.schema = FeatureSchema::from_json(doc.at("schema"));
    if (c.schema.hash() != stored_hash) fail(ErrorCode::kSchemaMismatch, path + ": embedded schema does not match its hash");
    c.model_config = ModelConfig::from_json(doc.at("model_config"));
    c.train_config = TrainConfig::from_json(doc.at("train_config"));
    c.standardizer = Standardizer::from_json(doc.at("standardizer"));
    c.tslm_cap = doc.at("tslm_cap").get<double>();
    c.horizon_hours = doc.at("horizon_hours").get<int>();
    c.epoch = doc.at("epoch").get<std::size_t>();
    c.val_auc = doc.at("val_auc").get<double>();
    for (const auto& p : doc.at("parameters")) {
      num::Shape shape = p.at("shape").get<num::Shape>();
      std::vector<double> values = p.at("values").get<std::vector<double>>();
      c.parameters.push_back({p.at("name").get<std::string>(), num::Tensor(std::move(shape), std::move(values)), true});
    }
    // Validates names and shapes against the configuration.
    Model check(c.model_config, c.schema, c.parameters);
    c.parameters = std::move(check.parameters());
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kIo, "malformed checkpoint " + path + ": " + e.what());
  }
}

}  // namespace mvrisk
