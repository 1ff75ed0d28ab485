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

#include "mvrisk/model.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "mvrisk/error.hpp"

namespace mvrisk {

using num::DropoutMode;
using num::Graph;
using num::Tensor;
using num::Var;

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Tensor uniform_tensor(num::Shape shape, double limit, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = (2.0 * uniform01(rng) - 1.0) * limit;
  return t;
}

bool is_attention(Variant v) { return v != Variant::kFfnn; }

std::size_t read_size(const nlohmann::json& doc, const char* key, std::size_t fallback) {
  if (!doc.contains(key)) return fallback;
  const auto& v = doc.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    fail(ErrorCode::kConfig, std::string("model.") + key + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

double read_double(const nlohmann::json& doc, const char* key, double fallback) {
  if (!doc.contains(key)) return fallback;
  const auto& v = doc.at(key);
  if (!v.is_number()) fail(ErrorCode::kConfig, std::string("model.") + key + " must be a number");
  return v.get<double>();
}

}  // namespace

std::string_view variant_name(Variant variant) {
  switch (variant) {
    case Variant::kFfnn: return "ffnn";
    case Variant::kFfnnSa: return "ffnn_sa";
    case Variant::kFfnnCa: return "ffnn_ca";
    case Variant::kFfnnMha: return "ffnn_mha";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  fail(ErrorCode::kConfig, "unknown variant '" + std::string(name) + "' (expected ffnn|ffnn_sa|ffnn_ca|ffnn_mha)");
}

void ModelConfig::validate() const {
  if (hidden_sizes.size() != 3) fail(ErrorCode::kConfig, "model.hidden_sizes must have exactly 3 entries");
  for (std::size_t h : hidden_sizes) {
    if (h == 0) fail(ErrorCode::kConfig, "model.hidden_sizes entries must be positive");
  }
  if (heads < 1) fail(ErrorCode::kConfig, "model.heads must be >= 1");
  if (key_dim < 1) fail(ErrorCode::kConfig, "model.key_dim must be >= 1");
  if (token_embed_dim < 1) fail(ErrorCode::kConfig, "model.token_embed_dim must be >= 1");
  if (attention_out_dim < 1) fail(ErrorCode::kConfig, "model.attention_out_dim must be >= 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail(ErrorCode::kConfig, "model.dropout_rate must lie in [0, 1)");
  if (!(output_scale > 0.0)) fail(ErrorCode::kConfig, "model.output_scale must be positive");
  if (!std::isfinite(tslm_decay_init)) fail(ErrorCode::kConfig, "model.tslm_decay_init must be finite");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"variant", variant_name(variant)},
          {"hidden_sizes", hidden_sizes},
          {"heads", heads},
          {"key_dim", key_dim},
          {"token_embed_dim", token_embed_dim},
          {"attention_out_dim", attention_out_dim},
          {"dropout_rate", dropout_rate},
          {"output_scale", output_scale},
          {"tslm_decay_init", tslm_decay_init}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(ErrorCode::kConfig, "model config must be an object");
  static const char* kKeys[] = {"variant", "hidden_sizes", "heads", "key_dim", "token_embed_dim",
                                "attention_out_dim", "dropout_rate", "output_scale", "tslm_decay_init"};
  for (const auto& [key, _] : doc.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return key == k; }) == std::end(kKeys)) {
      fail(ErrorCode::kConfig, "unknown key model." + key);
    }
  }
  ModelConfig c;
  if (doc.contains("variant")) {
    if (!doc.at("variant").is_string()) fail(ErrorCode::kConfig, "model.variant must be a string");
    c.variant = parse_variant(doc.at("variant").get<std::string>());
  }
  if (doc.contains("hidden_sizes")) {
    const auto& h = doc.at("hidden_sizes");
    if (!h.is_array()) fail(ErrorCode::kConfig, "model.hidden_sizes must be an array");
    c.hidden_sizes.clear();
    for (const auto& x : h) {
      if (!x.is_number_integer() || x.get<long long>() <= 0) {
        fail(ErrorCode::kConfig, "model.hidden_sizes entries must be positive integers");
      }
      c.hidden_sizes.push_back(x.get<std::size_t>());
    }
  }
  c.heads = read_size(doc, "heads", c.heads);
  c.key_dim = read_size(doc, "key_dim", c.key_dim);
  c.token_embed_dim = read_size(doc, "token_embed_dim", c.token_embed_dim);
  c.attention_out_dim = read_size(doc, "attention_out_dim", c.attention_out_dim);
  c.dropout_rate = read_double(doc, "dropout_rate", c.dropout_rate);
  c.output_scale = read_double(doc, "output_scale", c.output_scale);
  c.tslm_decay_init = read_double(doc, "tslm_decay_init", c.tslm_decay_init);
  c.validate();
  return c;
}

double tslm_scale(double x, double dt, double w) {
  const double sp = w > 0.0 ? w + std::log1p(std::exp(-w)) : std::log1p(std::exp(w));
  return x * std::exp(-sp * dt);
}

Var build_tokens(Graph& g, Var clinical, Var embed_scale, Var embed_identity) {
  return num::token_embed(g, clinical, embed_scale, embed_identity);
}

AttentionOutput mha_forward(Graph& g, Var query, Var tokens, const AttentionVars& block) {
  const Tensor& tok = g.value(tokens);
  if (tok.rank() != 3) fail(ErrorCode::kShape, "mha_forward: tokens must be [B, n, E], got " + num::shape_string(tok.shape()));
  const std::size_t B = tok.dim(0), n = tok.dim(1), E = tok.dim(2);
  const std::size_t H = block.wq.size();
  if (H == 0 || block.bq.size() != H || block.wk.size() != H || block.wv.size() != H || block.bv.size() != H) {
    fail(ErrorCode::kShape, "mha_forward: inconsistent head count");
  }
  const std::size_t Dk = block.key_dim;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(Dk));
  AttentionOutput out;
  std::vector<Var> pooled, wv_flat, bv_rows;
  for (std::size_t h = 0; h < H; ++h) {
    // q . k_i = tokens_i . Wk (Wq^T x + bq); the key bias shifts every score equally.
    Var wk_t = num::transpose(g, block.wk[h]);
    Var qk = num::add_bias(g, num::matmul(g, query, num::matmul(g, block.wq[h], wk_t)),
                           num::reshape(g, num::matmul(g, num::reshape(g, block.bq[h], {1, Dk}), wk_t), {E}));
    Var scores = num::bmm(g, tokens, num::reshape(g, qk, {B, E, 1}));
    scores = num::scale(g, num::reshape(g, scores, {B, n}), inv_sqrt);
    Var weights = num::softmax(g, scores, 1);
    out.weights.push_back(weights);
    // Weights sum to one, so pooling tokens first equals pooling value projections.
    pooled.push_back(num::reshape(g, num::bmm(g, num::reshape(g, weights, {B, 1, n}), tokens), {B, E}));
    wv_flat.push_back(num::reshape(g, block.wv[h], {1, E * Dk}));
    bv_rows.push_back(num::reshape(g, block.bv[h], {1, Dk}));
  }
  // Value and output projections folded into one [H*E, Dout] map through a
  // block-diagonal stack of the per-head value weights.
  std::vector<std::size_t> idx;
  idx.reserve(H * E * Dk);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t r = 0; r < E; ++r) {
      for (std::size_t c = 0; c < Dk; ++c) idx.push_back((h * E + r) * (H * Dk) + h * Dk + c);
    }
  }
  Var wv_all = H == 1 ? wv_flat[0] : num::concat(g, wv_flat);
  Var block_diag = num::reshape(g, num::scatter(g, num::reshape(g, wv_all, {H * E * Dk}), idx, H * E * H * Dk),
                                {H * E, H * Dk});
  Var bv_all = H == 1 ? bv_rows[0] : num::concat(g, bv_rows);
  const std::size_t Dout = g.value(block.wo).dim(1);
  Var bias = num::add(g, num::reshape(g, num::matmul(g, bv_all, block.wo), {Dout}), block.bo);
  Var pooled_all = H == 1 ? pooled[0] : num::concat(g, pooled);
  out.projected = num::add_bias(g, num::matmul(g, pooled_all, num::matmul(g, block_diag, block.wo)), bias);
  Var normed = num::layer_norm(g, out.projected, 1);
  out.output = num::add_bias(g, num::mul_row(g, normed, block.ln_gain), block.ln_bias);
  return out;
}

Model::Model(ModelConfig config, FeatureSchema schema, std::uint64_t seed)
    : config_(std::move(config)), schema_(std::move(schema)) {
  config_.validate();
  schema_.validate();
  if (schema_.tracked_width() == 0) fail(ErrorCode::kConfig, "model requires at least one tslm-tracked column");
  std::mt19937_64 rng(seed);
  const std::size_t T = schema_.tracked_width(), C = schema_.clinical_width(), M = schema_.comorbidity_width();
  auto weight = [&](std::string name, std::size_t fan_in, std::size_t fan_out) {
    params_.push_back({std::move(name), uniform_tensor({fan_in, fan_out}, std::sqrt(3.0 / static_cast<double>(fan_in)), rng), true});
  };
  auto fixed = [&](std::string name, std::size_t n, double value) {
    params_.push_back({std::move(name), Tensor({n}, value), false});
  };
  fixed("tslm.decay", T, config_.tslm_decay_init);
  std::size_t dense_in = C + M;
  if (is_attention(config_.variant)) {
    const std::size_t E = config_.token_embed_dim, Dk = config_.key_dim, Dq = query_width();
    params_.push_back({"embed.scale", uniform_tensor({C, E}, 1.0, rng), true});
    params_.push_back({"embed.identity", uniform_tensor({C, E}, 1.0, rng), true});
    for (std::size_t h = 0; h < config_.heads; ++h) {
      const std::string p = "attn.h" + std::to_string(h) + ".";
      weight(p + "wq", Dq, Dk);
      fixed(p + "bq", Dk, 0.0);
      weight(p + "wk", E, Dk);
      weight(p + "wv", E, Dk);
      fixed(p + "bv", Dk, 0.0);
    }
    weight("attn.wo", config_.heads * Dk, config_.attention_out_dim);
    fixed("attn.bo", config_.attention_out_dim, 0.0);
    fixed("attn.ln.gain", config_.attention_out_dim, 1.0);
    fixed("attn.ln.bias", config_.attention_out_dim, 0.0);
    dense_in += config_.attention_out_dim;
  }
  std::size_t in = dense_in;
  for (std::size_t k = 0; k < 3; ++k) {
    weight("dense" + std::to_string(k) + ".w", in, config_.hidden_sizes[k]);
    fixed("dense" + std::to_string(k) + ".b", config_.hidden_sizes[k], 0.0);
    in = config_.hidden_sizes[k];
  }
  weight("head.w", in, 1);
  fixed("head.b", 1, 0.0);
}

Model::Model(ModelConfig config, FeatureSchema schema, std::vector<NamedParameter> parameters)
    : config_(std::move(config)), schema_(std::move(schema)) {
  config_.validate();
  schema_.validate();
  Model reference(config_, schema_, 0);
  if (parameters.size() != reference.params_.size()) {
    fail(ErrorCode::kShape, "expected " + std::to_string(reference.params_.size()) + " parameter tensors, got " +
                                std::to_string(parameters.size()));
  }
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    const NamedParameter& want = reference.params_[i];
    if (parameters[i].name != want.name || parameters[i].value.shape() != want.value.shape()) {
      fail(ErrorCode::kShape, "parameter " + std::to_string(i) + ": expected " + want.name + " " +
                                  num::shape_string(want.value.shape()) + ", got " + parameters[i].name + " " +
                                  num::shape_string(parameters[i].value.shape()));
    }
    parameters[i].regularized = want.regularized;
  }
  params_ = std::move(parameters);
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const NamedParameter& p : params_) n += p.value.size();
  return n;
}

std::size_t Model::query_width() const {
  switch (config_.variant) {
    case Variant::kFfnnSa: return schema_.clinical_width();
    case Variant::kFfnnCa: return schema_.tracked_width();
    case Variant::kFfnnMha: return schema_.tracked_width() + schema_.comorbidity_width();
    case Variant::kFfnn: return 0;
  }
  return 0;
}

std::vector<Var> Model::bind(Graph& g) const {
  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (const NamedParameter& p : params_) vars.push_back(g.parameter(p.value));
  return vars;
}

Var Model::forward(Graph& g, std::span<const Var> params, const WindowBatch& batch, DropoutMode mode,
                   std::mt19937_64* rng, AttentionOutput* attention) const {
  if (params.size() != params_.size()) fail(ErrorCode::kUsage, "forward: parameter count mismatch");
  if (mode == DropoutMode::kTrain && rng == nullptr) fail(ErrorCode::kUsage, "forward: train mode needs an rng");
  const std::size_t T = schema_.tracked_width(), U = schema_.untracked().size(), M = schema_.comorbidity_width();
  const std::size_t B = batch.rows;
  auto check = [&](const Tensor& t, std::size_t width, const char* what) {
    if (t.rank() != 2 || t.dim(0) != B || t.dim(1) != std::max<std::size_t>(width, 1)) {
      fail(ErrorCode::kConfig, std::string("window batch ") + what + " block " + num::shape_string(t.shape()) +
                                   " does not match schema width " + std::to_string(width));
    }
  };
  check(batch.tracked, T, "tracked");
  check(batch.tslm, T, "tslm");
  check(batch.untracked, U, "untracked");
  check(batch.comorbidities, M, "comorbidity");

  std::size_t k = 0;
  auto next = [&]() { return params[k++]; };

  Var tracked = g.input(batch.tracked);
  Var tslm = g.input(batch.tslm);
  Var rate = num::softplus(g, next());
  Var decay = num::exp(g, num::scale(g, num::mul_row(g, tslm, rate), -1.0));
  Var scaled = num::multiply(g, tracked, decay);
  Var clinical = scaled;
  if (U > 0) {
    const Var parts[] = {scaled, g.input(batch.untracked)};
    clinical = num::concat(g, parts);
  }
  std::optional<Var> comorb;
  if (M > 0) comorb = g.input(batch.comorbidities);

  std::vector<Var> dense_parts;
  if (is_attention(config_.variant)) {
    Var scale_emb = next();
    Var identity_emb = next();
    Var tokens = build_tokens(g, clinical, scale_emb, identity_emb);
    AttentionVars block;
    block.key_dim = config_.key_dim;
    for (std::size_t h = 0; h < config_.heads; ++h) {
      block.wq.push_back(next());
      block.bq.push_back(next());
      block.wk.push_back(next());
      block.wv.push_back(next());
      block.bv.push_back(next());
    }
    block.wo = next();
    block.bo = next();
    block.ln_gain = next();
    block.ln_bias = next();
    Var query = clinical;
    if (config_.variant == Variant::kFfnnCa) {
      query = decay;
    } else if (config_.variant == Variant::kFfnnMha) {
      query = decay;
      if (comorb) {
        const Var parts[] = {decay, *comorb};
        query = num::concat(g, parts);
      }
    }
    AttentionOutput att = mha_forward(g, query, tokens, block);
    dense_parts.push_back(att.output);
    if (attention) *attention = att;
  }
  dense_parts.push_back(clinical);
  if (comorb) dense_parts.push_back(*comorb);
  Var h = num::concat(g, dense_parts);

  std::mt19937_64 unused(0);
  std::mt19937_64& drng = rng ? *rng : unused;
  for (std::size_t layer = 0; layer < 3; ++layer) {
    Var w = next();
    Var b = next();
    h = num::relu(g, num::add_bias(g, num::matmul(g, h, w), b));
    h = num::dropout(g, h, config_.dropout_rate, mode, drng);
  }
  Var w = next();
  Var b = next();
  Var z = num::add_bias(g, num::matmul(g, h, w), b);
  return num::scale(g, num::sigmoid(g, z), config_.output_scale);
}

void Model::set_output_prior(double mean_target) {
  const double p = std::clamp(mean_target / config_.output_scale, 1e-4, 1.0 - 1e-4);
  params_.back().value = Tensor({1}, std::log(p / (1.0 - p)));
}

WindowBatch slice_batch(const WindowBatch& batch, std::size_t begin, std::size_t end) {
  if (begin >= end || end > batch.rows) fail(ErrorCode::kUsage, "slice_batch: bad row range");
  auto rows = [&](const Tensor& t) {
    const std::size_t w = t.dim(1);
    std::vector<double> data(t.raw() + begin * w, t.raw() + end * w);
    return Tensor({end - begin, w}, std::move(data));
  };
  WindowBatch out;
  out.rows = end - begin;
  out.tracked = rows(batch.tracked);
  out.untracked = rows(batch.untracked);
  out.tslm = rows(batch.tslm);
  out.comorbidities = rows(batch.comorbidities);
  return out;
}

std::vector<double> Model::predict(const WindowBatch& batch, std::size_t threads) const {
  constexpr std::size_t kChunk = 2048;
  std::vector<double> scores(batch.rows);
  if (batch.rows == 0) return scores;
  const std::size_t chunks = (batch.rows + kChunk - 1) / kChunk;
  auto run = [&](std::size_t worker, std::size_t stride) {
    for (std::size_t c = worker; c < chunks; c += stride) {
      const std::size_t begin = c * kChunk, end = std::min(batch.rows, begin + kChunk);
      WindowBatch part = chunks == 1 ? batch : slice_batch(batch, begin, end);
      Graph g;
      std::vector<Var> vars;
      vars.reserve(params_.size());
      for (const NamedParameter& p : params_) vars.push_back(g.input(p.value));
      Var out = forward(g, vars, part, DropoutMode::kEval);
      const Tensor& v = g.value(out);
      std::copy(v.raw(), v.raw() + v.size(), scores.begin() + static_cast<std::ptrdiff_t>(begin));
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, chunks));
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          run(w, workers);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return scores;
}

namespace {

FeatureSchema small_schema() {
  std::vector<ClinicalColumn> clinical = {
      {"heart_rate", FeatureGroup::kVital, 80.0, 12.0},
      {"o2sat", FeatureGroup::kVital, 97.0, 2.0},
      {"fio2", FeatureGroup::kLab, 0.3, 0.1},
      {"peep", FeatureGroup::kLab, 5.0, 2.0},
      {"age", FeatureGroup::kDemographic, 60.0, 15.0},
      {"on_vasopressor", FeatureGroup::kMedication, 0.0, 1.0},
  };
  FeatureSchema s(std::move(clinical), {"copd", "chf", "pneumonia"}, {"heart_rate", "o2sat", "fio2", "peep"}, "fio2",
                  "peep");
  s.validate();
  return s;
}

WindowBatch random_batch(const FeatureSchema& schema, std::size_t rows, std::mt19937_64& rng) {
  WindowBatch b;
  b.rows = rows;
  const std::size_t T = schema.tracked_width(), U = schema.untracked().size(), M = schema.comorbidity_width();
  b.tracked = uniform_tensor({rows, std::max<std::size_t>(T, 1)}, 1.5, rng);
  b.untracked = uniform_tensor({rows, std::max<std::size_t>(U, 1)}, 1.5, rng);
  b.tslm = Tensor({rows, std::max<std::size_t>(T, 1)});
  for (double& x : b.tslm.data()) x = std::floor(uniform01(rng) * 6.0);
  b.comorbidities = Tensor({rows, std::max<std::size_t>(M, 1)});
  for (double& x : b.comorbidities.data()) x = uniform01(rng) < 0.4 ? 1.0 : 0.0;
  return b;
}

num::NamedCheck check_model(const std::string& name, Model& model, std::size_t rows, std::size_t max_entries,
                            std::mt19937_64& rng) {
  // Biases, gains and decays start at constants; spread them so every path is exercised.
  for (NamedParameter& p : model.parameters()) {
    if (!p.regularized) {
      for (double& x : p.value.data()) x += 2.0 * uniform01(rng) - 1.0;
    }
  }
  const WindowBatch batch = random_batch(model.schema(), rows, rng);
  Tensor weights({rows, 1});
  for (double& x : weights.data()) x = 0.5 + uniform01(rng);
  std::vector<Tensor> params;
  for (const NamedParameter& p : model.parameters()) params.push_back(p.value);
  num::ScalarFunction fn = [&](Graph& g, std::span<const Var> vars) {
    Var risk = model.forward(g, vars, batch, DropoutMode::kEval);
    return num::sum(g, num::multiply(g, risk, g.input(weights)));
  };
  num::GradCheckOptions opts;
  opts.max_entries_per_tensor = max_entries;
  opts.epsilon = 1e-3;
  opts.richardson = true;
  opts.seed = rng();
  return {name, num::grad_check(fn, params, opts).max_rel_error};
}

}  // namespace

std::vector<num::NamedCheck> model_grad_checks(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x6d6f64656cULL);
  std::vector<num::NamedCheck> out;
  const FeatureSchema small = small_schema();
  for (Variant v : kAllVariants) {
    ModelConfig c;
    c.variant = v;
    c.hidden_sizes = {6, 5, 4};
    c.heads = 2;
    c.key_dim = 3;
    c.token_embed_dim = 2;
    c.attention_out_dim = 3;
    Model m(c, small, rng());
    out.push_back(check_model("model/" + std::string(variant_name(v)) + "/small", m, 4, 0, rng));
  }
  for (Variant v : kAllVariants) {
    ModelConfig c;
    c.variant = v;
    Model m(c, FeatureSchema::default_schema(), rng());
    out.push_back(check_model("model/" + std::string(variant_name(v)) + "/default", m, 2, 3, rng));
  }
  return out;
}

}  // namespace mvrisk
