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

#ifndef MVRISK_MODEL_HPP_
#define MVRISK_MODEL_HPP_

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvrisk/features.hpp"
#include "mvrisk/gradcheck.hpp"
#include "mvrisk/graph.hpp"

namespace mvrisk {

enum class Variant { kFfnn, kFfnnSa, kFfnnCa, kFfnnMha };

std::string_view variant_name(Variant variant);
Variant parse_variant(std::string_view name);
inline constexpr std::array<Variant, 4> kAllVariants = {Variant::kFfnn, Variant::kFfnnSa, Variant::kFfnnCa,
                                                        Variant::kFfnnMha};

struct ModelConfig {
  Variant variant = Variant::kFfnnMha;
  std::vector<std::size_t> hidden_sizes{100, 80, 60};
  std::size_t heads = 3;
  std::size_t key_dim = 150;  // per head
  std::size_t token_embed_dim = 16;
  std::size_t attention_out_dim = 32;
  double dropout_rate = 0.2;
  double output_scale = 2.0;
  double tslm_decay_init = -3.0;

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& doc);
};

struct NamedParameter {
  std::string name;
  num::Tensor value;
  bool regularized = true;
};

// x * exp(-softplus(w) * dt).
double tslm_scale(double x, double dt, double w);

// One token per clinical variable: x[b, v] * scale[v] + identity[v].
num::Var build_tokens(num::Graph& g, num::Var clinical, num::Var embed_scale, num::Var embed_identity);

struct AttentionVars {
  std::vector<num::Var> wq, bq, wk, wv, bv;  // one per head
  num::Var wo, bo, ln_gain, ln_bias;
  std::size_t key_dim = 1;
};

struct AttentionOutput {
  std::vector<num::Var> weights;  // per head, [B, tokens]
  num::Var projected;             // after the output projection, before normalization
  num::Var output;                // layer-normalized
};

// Single query per head projected from `query`; keys and values from `tokens`
// ([B, n, E]).
AttentionOutput mha_forward(num::Graph& g, num::Var query, num::Var tokens, const AttentionVars& block);

class Model {
 public:
  // Randomly initialized.
  Model(ModelConfig config, FeatureSchema schema, std::uint64_t seed);
  Model(ModelConfig config, FeatureSchema schema, std::vector<NamedParameter> parameters);

  const ModelConfig& config() const noexcept { return config_; }
  const FeatureSchema& schema() const noexcept { return schema_; }
  std::vector<NamedParameter>& parameters() noexcept { return params_; }
  const std::vector<NamedParameter>& parameters() const noexcept { return params_; }
  std::size_t parameter_count() const;
  // Sets the head bias so the initial risk equals `mean_target` (clamped into the output range).
  void set_output_prior(double mean_target);
  std::size_t query_width() const;

  // Registers every parameter as a trainable leaf, in parameters() order.
  std::vector<num::Var> bind(num::Graph& g) const;

  // Risk scores [B, 1] for a window batch. `rng` is required in train mode.
  num::Var forward(num::Graph& g, std::span<const num::Var> params, const WindowBatch& batch,
                   num::DropoutMode mode, std::mt19937_64* rng = nullptr,
                   AttentionOutput* attention = nullptr) const;

  // Eval-mode scores, computed in chunks across `threads` workers.
  std::vector<double> predict(const WindowBatch& batch, std::size_t threads = 1) const;

 private:

  ModelConfig config_;
  FeatureSchema schema_;
  std::vector<NamedParameter> params_;
};

// Rows [begin, end) of a batch.
WindowBatch slice_batch(const WindowBatch& batch, std::size_t begin, std::size_t end);

// End-to-end finite-difference checks of the risk score for every variant on
// a reduced configuration, plus sampled entries of the default configuration.
std::vector<num::NamedCheck> model_grad_checks(std::uint64_t seed);

}  // namespace mvrisk

#endif  // MVRISK_MODEL_HPP_
