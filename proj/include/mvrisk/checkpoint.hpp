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

#ifndef MVRISK_CHECKPOINT_HPP_
#define MVRISK_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvrisk/features.hpp"
#include "mvrisk/model.hpp"
#include "mvrisk/train.hpp"

namespace mvrisk {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  FeatureSchema schema = FeatureSchema::default_schema();
  ModelConfig model_config;
  TrainConfig train_config;
  Standardizer standardizer;
  double tslm_cap = kDefaultTslmCap;
  int horizon_hours = 24;
  std::size_t epoch = 0;
  double val_auc = 0.0;
  std::vector<NamedParameter> parameters;

  Model model() const;
};

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);

// Throws Error(kSchemaMismatch) when `expected` is given and its hash differs
// from the stored one.
Checkpoint load_checkpoint(const std::string& path, const FeatureSchema* expected = nullptr);

}  // namespace mvrisk

#endif  // MVRISK_CHECKPOINT_HPP_
