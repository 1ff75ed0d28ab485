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

#ifndef MVRISK_TRAIN_HPP_
#define MVRISK_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvrisk/cohort.hpp"
#include "mvrisk/eval.hpp"
#include "mvrisk/features.hpp"
#include "mvrisk/model.hpp"

namespace mvrisk {

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batch_size = 3000;
  double learning_rate = 0.006;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double l1 = 1e-5;
  double l2 = 1e-4;
  std::size_t eval_every_epochs = 1;
  double train_fraction = 0.8;
  double validation_fraction = 0.1;  // of the training share
  std::size_t shard_size = 512;
  bool record_wall_time = false;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
  // Keys absent from `doc` keep the values of `base`.
  static TrainConfig from_json(const nlohmann::json& doc, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& doc);
};

// Standardized per-patient inputs and window labels of a whole cohort.
struct Dataset {
  FeatureSchema schema = FeatureSchema::default_schema();
  std::vector<std::string> patient_ids;
  std::vector<HourlyInput> inputs;
  std::vector<std::vector<WindowLabel>> labels;
  std::vector<Partition> partitions;
  std::vector<std::optional<int>> onsets;

  // Evaluable windows of patients in `part`, by patient then hour.
  std::vector<WindowRef> windows(Partition part) const;
  std::vector<double> targets(std::span<const WindowRef> refs) const;
};

Dataset prepare_dataset(const Cohort& cohort, const Standardizer& standardizer, double tslm_cap, int horizon_hours);

// Evaluable windows of every patient in `part` that has at least one.
ScoredCohort score_partition(const Model& model, const Dataset& data, Partition part, std::size_t threads);

struct AdamState {
  std::vector<num::Tensor> m;
  std::vector<num::Tensor> v;
  std::uint64_t step = 0;
};

AdamState make_adam_state(const std::vector<NamedParameter>& params);
void adam_step(std::vector<NamedParameter>& params, const std::vector<num::Tensor>& grads, AdamState& state,
               const TrainConfig& config);

// l1 * sum|w| + l2 * sum w^2 over regularized parameters. Adds its gradient
// to `grads` when given.
double penalty(const std::vector<NamedParameter>& params, double l1, double l2,
               std::vector<num::Tensor>* grads = nullptr);

struct BatchGradient {
  double rmse = 0.0;
  double penalty = 0.0;
  double sum_squares = 0.0;
  std::vector<num::Tensor> grads;
};

// Gradient of rmse + penalty on one batch, sharded with a fixed-order sum.
BatchGradient batch_gradient(const Model& model, const Dataset& data, std::span<const WindowRef> refs,
                             const TrainConfig& config, num::DropoutMode mode, std::uint64_t batch_seed);

struct EpochLog {
  std::size_t epoch = 0;
  double train_rmse = 0.0;
  std::optional<double> val_auc;
  std::optional<double> wall_seconds;
};

struct TrainResult {
  std::vector<NamedParameter> best_parameters;
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;
  std::vector<EpochLog> log;
};

TrainResult train(const Model& initial, const Dataset& data, const TrainConfig& config, const EvalSettings& eval,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

void write_train_log(const std::string& path, const std::vector<EpochLog>& log);

}  // namespace mvrisk

#endif  // MVRISK_TRAIN_HPP_
