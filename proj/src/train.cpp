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

#include "mvrisk/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "mvrisk/cohort_io.hpp"
#include "mvrisk/error.hpp"

namespace mvrisk {

using num::Graph;
using num::Tensor;
using num::Var;

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
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

double parameter_norm(const std::vector<NamedParameter>& params) {
  double s = 0.0;
  for (const NamedParameter& p : params) {
    for (double x : p.value.data()) s += x * x;
  }
  return std::sqrt(s);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::kConfig, "train.epochs must be >= 1");
  if (batch_size < 1) fail(ErrorCode::kConfig, "train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) fail(ErrorCode::kConfig, "train.learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail(ErrorCode::kConfig, "train.adam_beta1 must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail(ErrorCode::kConfig, "train.adam_beta2 must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) fail(ErrorCode::kConfig, "train.adam_epsilon must be positive");
  if (!(l1 >= 0.0) || !(l2 >= 0.0)) fail(ErrorCode::kConfig, "train.l1 and train.l2 must be >= 0");
  if (eval_every_epochs < 1) fail(ErrorCode::kConfig, "train.eval_every_epochs must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) fail(ErrorCode::kConfig, "train.train_fraction must lie in (0, 1)");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    fail(ErrorCode::kConfig, "train.validation_fraction must lie in (0, 1)");
  }
  if (shard_size < 1) fail(ErrorCode::kConfig, "train.shard_size must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"adam_epsilon", adam_epsilon},
          {"l1", l1},
          {"l2", l2},
          {"eval_every_epochs", eval_every_epochs},
          {"train_fraction", train_fraction},
          {"validation_fraction", validation_fraction},
          {"shard_size", shard_size},
          {"record_wall_time", record_wall_time},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc) { return from_json(doc, TrainConfig()); }

TrainConfig TrainConfig::from_json(const nlohmann::json& doc, TrainConfig c) {
  if (!doc.is_object()) fail(ErrorCode::kConfig, "train config must be an object");
  for (const auto& [key, value] : doc.items()) {
    auto size = [&](std::size_t& out) {
      if (!value.is_number_integer() || value.get<long long>() < 0) {
        fail(ErrorCode::kConfig, "train." + key + " must be a non-negative integer");
      }
      out = value.get<std::size_t>();
    };
    auto real = [&](double& out) {
      if (!value.is_number()) fail(ErrorCode::kConfig, "train." + key + " must be a number");
      out = value.get<double>();
    };
    if (key == "epochs") size(c.epochs);
    else if (key == "batch_size") size(c.batch_size);
    else if (key == "learning_rate") real(c.learning_rate);
    else if (key == "adam_beta1") real(c.adam_beta1);
    else if (key == "adam_beta2") real(c.adam_beta2);
    else if (key == "adam_epsilon") real(c.adam_epsilon);
    else if (key == "l1") real(c.l1);
    else if (key == "l2") real(c.l2);
    else if (key == "eval_every_epochs") size(c.eval_every_epochs);
    else if (key == "train_fraction") real(c.train_fraction);
    else if (key == "validation_fraction") real(c.validation_fraction);
    else if (key == "shard_size") size(c.shard_size);
    else if (key == "record_wall_time") {
      if (!value.is_boolean()) fail(ErrorCode::kConfig, "train.record_wall_time must be a boolean");
      c.record_wall_time = value.get<bool>();
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) fail(ErrorCode::kConfig, "train.seed must be a non-negative integer");
      c.seed = value.get<std::uint64_t>();
    } else {
      fail(ErrorCode::kConfig, "unknown key train." + key);
    }
  }
  c.validate();
  return c;
}

std::vector<WindowRef> Dataset::windows(Partition part) const {
  std::vector<WindowRef> refs;
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    if (partitions[p] != part) continue;
    for (std::size_t t = 0; t < labels[p].size(); ++t) {
      if (labels[p][t].evaluable) refs.push_back({static_cast<std::uint32_t>(p), static_cast<std::int32_t>(t)});
    }
  }
  return refs;
}

std::vector<double> Dataset::targets(std::span<const WindowRef> refs) const {
  std::vector<double> y;
  y.reserve(refs.size());
  for (const WindowRef& r : refs) y.push_back(labels[r.patient][static_cast<std::size_t>(r.hour)].target);
  return y;
}

Dataset prepare_dataset(const Cohort& cohort, const Standardizer& standardizer, double tslm_cap, int horizon_hours) {
  Dataset d;
  d.schema = cohort.schema;
  const std::size_t n = cohort.patients.size();
  d.patient_ids.reserve(n);
  d.inputs.reserve(n);
  for (const PatientRecord& r : cohort.patients) {
    d.patient_ids.push_back(r.patient_id);
    HourlyInput in = forward_fill(r, cohort.schema, tslm_cap);
    apply_standardizer(in, standardizer);
    d.inputs.push_back(std::move(in));
    d.labels.push_back(window_labels(r, horizon_hours));
    d.partitions.push_back(r.partition);
    d.onsets.push_back(r.outcome.mv_onset_hour);
  }
  return d;
}

ScoredCohort score_partition(const Model& model, const Dataset& data, Partition part, std::size_t threads) {
  const std::vector<WindowRef> refs = data.windows(part);
  ScoredCohort out;
  if (refs.empty()) return out;
  const WindowBatch batch = gather_windows(data.inputs, refs, data.schema);
  const std::vector<double> scores = model.predict(batch, threads);
  std::size_t i = 0;
  while (i < refs.size()) {
    PatientScores ps;
    const std::uint32_t p = refs[i].patient;
    for (; i < refs.size() && refs[i].patient == p; ++i) {
      ps.scores.push_back(scores[i]);
      ps.labels.push_back(data.labels[p][static_cast<std::size_t>(refs[i].hour)].target >= 1.0 ? 1 : 0);
    }
    out.push_back(std::move(ps));
  }
  return out;
}

AdamState make_adam_state(const std::vector<NamedParameter>& params) {
  AdamState s;
  for (const NamedParameter& p : params) {
    s.m.emplace_back(p.value.shape());
    s.v.emplace_back(p.value.shape());
  }
  return s;
}

void adam_step(std::vector<NamedParameter>& params, const std::vector<Tensor>& grads, AdamState& state,
               const TrainConfig& c) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    fail(ErrorCode::kShape, "adam_step: parameter, gradient and state counts differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.adam_beta1, t);
  const double bc2 = 1.0 - std::pow(c.adam_beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& w = params[k].value;
    const Tensor& g = grads[k];
    if (g.size() != w.size()) fail(ErrorCode::kShape, "adam_step: gradient shape mismatch for " + params[k].name);
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = c.adam_beta1 * m[i] + (1.0 - c.adam_beta1) * g[i];
      v[i] = c.adam_beta2 * v[i] + (1.0 - c.adam_beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= c.learning_rate * mhat / (std::sqrt(vhat) + c.adam_epsilon);
    }
  }
}

double penalty(const std::vector<NamedParameter>& params, double l1, double l2, std::vector<Tensor>* grads) {
  double total = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k].regularized) continue;
    const Tensor& w = params[k].value;
    double a = 0.0, s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      a += std::fabs(w[i]);
      s += w[i] * w[i];
      if (grads) {
        const double sign = w[i] > 0.0 ? 1.0 : (w[i] < 0.0 ? -1.0 : 0.0);
        (*grads)[k][i] += l1 * sign + 2.0 * l2 * w[i];
      }
    }
    total += l1 * a + l2 * s;
  }
  return total;
}

BatchGradient batch_gradient(const Model& model, const Dataset& data, std::span<const WindowRef> refs,
                             const TrainConfig& config, num::DropoutMode mode, std::uint64_t batch_seed) {
  if (refs.empty()) fail(ErrorCode::kUsage, "rmse of an empty batch");
  for (const WindowRef& r : refs) {
    if (data.partitions[r.patient] != Partition::kTrain) {
      fail(ErrorCode::kUsage, "training batch contains patient " + data.patient_ids[r.patient] + " from the " +
                                  std::string(partition_name(data.partitions[r.patient])) + " partition");
    }
  }
  const auto& params = model.parameters();
  const std::size_t shards = (refs.size() + config.shard_size - 1) / config.shard_size;
  struct ShardResult {
    double ss = 0.0;
    std::vector<Tensor> grads;
  };
  std::vector<ShardResult> results(shards);
  parallel_for(shards, config.threads, [&](std::size_t s) {
    const std::size_t begin = s * config.shard_size, end = std::min(refs.size(), begin + config.shard_size);
    const std::span<const WindowRef> part = refs.subspan(begin, end - begin);
    const WindowBatch batch = gather_windows(data.inputs, part, data.schema);
    const std::vector<double> y = data.targets(part);
    Graph g;
    const std::vector<Var> vars = model.bind(g);
    std::mt19937_64 rng(mix(batch_seed, s));
    Var pred = model.forward(g, vars, batch, mode, &rng);
    Var target = g.input(Tensor({part.size(), 1}, y));
    Var diff = num::subtract(g, pred, target);
    Var ss = num::sum(g, num::multiply(g, diff, diff));
    g.backward(ss);
    results[s].ss = g.value(ss)[0];
    for (Var v : vars) results[s].grads.push_back(g.grad(v));
  });

  BatchGradient out;
  for (const NamedParameter& p : params) out.grads.emplace_back(p.value.shape());
  for (const ShardResult& r : results) {
    out.sum_squares += r.ss;
    for (std::size_t k = 0; k < out.grads.size(); ++k) out.grads[k].add_inplace(r.grads[k]);
  }
  const double n = static_cast<double>(refs.size());
  out.rmse = std::sqrt(out.sum_squares / n);
  // d sqrt(SS / n) = dSS / (2 n rmse); zero error uses the zero subgradient.
  const double factor = out.rmse > 0.0 ? 1.0 / (2.0 * n * out.rmse) : 0.0;
  for (Tensor& g : out.grads) {
    for (double& x : g.data()) x *= factor;
  }
  out.penalty = penalty(params, config.l1, config.l2, &out.grads);
  return out;
}

TrainResult train(const Model& initial, const Dataset& data, const TrainConfig& config, const EvalSettings& eval,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  if (initial.schema().hash() != data.schema.hash()) {
    fail(ErrorCode::kSchemaMismatch, "model schema does not match dataset schema");
  }
  std::vector<WindowRef> train_refs = data.windows(Partition::kTrain);
  if (train_refs.empty()) fail(ErrorCode::kUsage, "no training windows");
  {
    bool pos = false, neg = false;
    for (const WindowRef& r : data.windows(Partition::kValidation)) {
      (data.labels[r.patient][static_cast<std::size_t>(r.hour)].target >= 1.0 ? pos : neg) = true;
    }
    if (!pos || !neg) fail(ErrorCode::kUndefinedMetric, "validation partition needs both positive and negative windows");
  }

  Model model = initial;
  AdamState state = make_adam_state(model.parameters());
  TrainResult result;
  result.best_parameters = model.parameters();
  bool have_best = false;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(mix(config.seed, epoch));
    for (std::size_t i = train_refs.size(); i > 1; --i) {
      std::swap(train_refs[i - 1], train_refs[shuffle_rng() % i]);
    }
    double ss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < train_refs.size(); begin += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(train_refs.size(), begin + config.batch_size);
      const std::span<const WindowRef> refs(train_refs.data() + begin, end - begin);
      BatchGradient bg = batch_gradient(model, data, refs, config, num::DropoutMode::kTrain,
                                        mix(mix(config.seed, epoch), batch_index + 1));
      if (!std::isfinite(bg.rmse) || !std::isfinite(bg.penalty)) {
        fail(ErrorCode::kNumeric, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(batch_index) + " (rmse " + std::to_string(bg.rmse) +
                                      ", penalty " + std::to_string(bg.penalty) + ", parameter norm " +
                                      std::to_string(parameter_norm(model.parameters())) + ")");
      }
      ss += bg.sum_squares;
      adam_step(model.parameters(), bg.grads, state, config);
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_rmse = std::sqrt(ss / static_cast<double>(train_refs.size()));
    if (epoch % config.eval_every_epochs == 0 || epoch == config.epochs) {
      const ScoredCohort val = score_partition(model, data, Partition::kValidation, config.threads);
      const double auc = policy_auc(val, eval.silence_hours);
      entry.val_auc = auc;
      if (!have_best || auc > result.best_val_auc) {
        have_best = true;
        result.best_val_auc = auc;
        result.best_epoch = epoch;
        result.best_parameters = model.parameters();
      }
    }
    if (config.record_wall_time) {
      entry.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return result;
}

void write_train_log(const std::string& path, const std::vector<EpochLog>& log) {
  std::ofstream os(path);
  if (!os) fail(ErrorCode::kIo, "cannot write " + path);
  os << "epoch,train_rmse,val_auc,wall_seconds\n";
  for (const EpochLog& e : log) {
    os << e.epoch << ',' << format_double(e.train_rmse) << ',';
    if (e.val_auc) os << format_double(*e.val_auc);
    os << ',';
    if (e.wall_seconds) os << format_double(*e.wall_seconds);
    os << '\n';
  }
}

}  // namespace mvrisk
