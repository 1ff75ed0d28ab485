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

#include "mvrisk/mvrisk.h"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <cstring>
#include <new>
#include <string>

#include "mvrisk/checkpoint.hpp"
#include "mvrisk/config.hpp"
#include "mvrisk/error.hpp"
#include "mvrisk/eval.hpp"
#include "mvrisk/pipeline.hpp"

struct mvr_config {
  nlohmann::json doc = mvrisk::default_run_config_json();
};

struct mvr_model {
  mvrisk::Checkpoint checkpoint;
  mvrisk::Model model;
};

namespace {

thread_local std::string g_last_error;

mvr_status to_status(mvrisk::ErrorCode code) {
  using mvrisk::ErrorCode;
  switch (code) {
    case ErrorCode::kUsage:
    case ErrorCode::kShape: return MVR_ERR_USAGE;
    case ErrorCode::kConfig: return MVR_ERR_CONFIG;
    case ErrorCode::kIo: return MVR_ERR_IO;
    case ErrorCode::kSchemaMismatch: return MVR_ERR_SCHEMA_MISMATCH;
    case ErrorCode::kIngest: return MVR_ERR_INGEST;
    case ErrorCode::kUndefinedMetric: return MVR_ERR_UNDEFINED_METRIC;
    case ErrorCode::kNumeric: return MVR_ERR_NUMERIC;
    case ErrorCode::kUnattainable: return MVR_ERR_UNATTAINABLE;
  }
  return MVR_ERR_INTERNAL;
}

template <typename F>
mvr_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const mvrisk::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MVR_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MVR_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return MVR_ERR_INTERNAL;
  }
}

mvr_status usage(const char* message) {
  g_last_error = message;
  return MVR_ERR_USAGE;
}

void emit(const nlohmann::json& doc, char** summary) {
  if (!summary) return;
  const std::string text = doc.dump(2);
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, text.c_str(), text.size() + 1);
  *summary = out;
}

mvrisk::RunConfig parsed(const mvr_config* config) { return mvrisk::parse_run_config(config->doc); }

}  // namespace

extern "C" {

const char* mvr_last_error(void) { return g_last_error.c_str(); }

const char* mvr_status_name(mvr_status status) {
  switch (status) {
    case MVR_OK: return "ok";
    case MVR_ERR_INTERNAL: return "internal";
    case MVR_ERR_USAGE: return "usage";
    case MVR_ERR_CONFIG: return "config";
    case MVR_ERR_IO: return "io";
    case MVR_ERR_SCHEMA_MISMATCH: return "schema_mismatch";
    case MVR_ERR_INGEST: return "ingest";
    case MVR_ERR_UNDEFINED_METRIC: return "undefined_metric";
    case MVR_ERR_NUMERIC: return "numeric";
    case MVR_ERR_UNATTAINABLE: return "unattainable";
    case MVR_ERR_GRADCHECK_FAILED: return "gradcheck_failed";
  }
  return "unknown";
}

const char* mvr_version(void) { return "1.0.0"; }

mvr_status mvr_config_create(mvr_config** out) {
  if (!out) return usage("mvr_config_create: out is NULL");
  return guarded([&] {
    *out = new mvr_config();
    return MVR_OK;
  });
}

mvr_status mvr_config_load_file(mvr_config* config, const char* path) {
  if (!config || !path) return usage("mvr_config_load_file: NULL argument");
  return guarded([&] {
    nlohmann::json merged = config->doc;
    mvrisk::merge_run_config(merged, mvrisk::load_json_file(path));
    mvrisk::parse_run_config(merged);
    config->doc = std::move(merged);
    return MVR_OK;
  });
}

mvr_status mvr_config_set(mvr_config* config, const char* assignment) {
  if (!config || !assignment) return usage("mvr_config_set: NULL argument");
  return guarded([&] {
    nlohmann::json merged = config->doc;
    mvrisk::apply_override(merged, assignment);
    config->doc = std::move(merged);
    return MVR_OK;
  });
}

mvr_status mvr_config_dump(const mvr_config* config, char* buf, size_t size, size_t* needed) {
  if (!config) return usage("mvr_config_dump: NULL config");
  return guarded([&] {
    const std::string text = config->doc.dump(2);
    if (needed) *needed = text.size() + 1;
    if (buf && size > 0) {
      const size_t n = std::min(size - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
    return MVR_OK;
  });
}

void mvr_config_destroy(mvr_config* config) { delete config; }

mvr_status mvr_synth(const mvr_config* config, char** summary) {
  if (!config) return usage("mvr_synth: NULL config");
  return guarded([&] {
    emit(mvrisk::run_synth(parsed(config)), summary);
    return MVR_OK;
  });
}

mvr_status mvr_ingest(const mvr_config* config, char** summary) {
  if (!config) return usage("mvr_ingest: NULL config");
  return guarded([&] {
    emit(mvrisk::run_ingest(parsed(config)), summary);
    return MVR_OK;
  });
}

mvr_status mvr_train(const mvr_config* config, char** summary) {
  if (!config) return usage("mvr_train: NULL config");
  return guarded([&] {
    emit(mvrisk::run_train(parsed(config)), summary);
    return MVR_OK;
  });
}

mvr_status mvr_train_with_progress(const mvr_config* config, mvr_epoch_fn callback, void* user, char** summary) {
  if (!config) return usage("mvr_train_with_progress: NULL config");
  return guarded([&] {
    std::function<void(const mvrisk::EpochLog&)> hook;
    if (callback) {
      hook = [&](const mvrisk::EpochLog& e) {
        callback(e.epoch, e.train_rmse, e.val_auc ? *e.val_auc : std::nan(""), user);
      };
    }
    emit(mvrisk::run_train(parsed(config), hook), summary);
    return MVR_OK;
  });
}

mvr_status mvr_evaluate(const mvr_config* config, const char* checkpoint, char** summary) {
  if (!config || !checkpoint) return usage("mvr_evaluate: NULL argument");
  return guarded([&] {
    emit(mvrisk::run_evaluate(parsed(config), checkpoint), summary);
    return MVR_OK;
  });
}

mvr_status mvr_compare(const mvr_config* config, const char* checkpoint_a, const char* checkpoint_b, char** summary) {
  if (!config || !checkpoint_a || !checkpoint_b) return usage("mvr_compare: NULL argument");
  return guarded([&] {
    emit(mvrisk::run_compare(parsed(config), checkpoint_a, checkpoint_b), summary);
    return MVR_OK;
  });
}

mvr_status mvr_explain(const mvr_config* config, const char* checkpoint, char** summary) {
  if (!config || !checkpoint) return usage("mvr_explain: NULL argument");
  return guarded([&] {
    emit(mvrisk::run_explain(parsed(config), checkpoint), summary);
    return MVR_OK;
  });
}

mvr_status mvr_gradcheck(const mvr_config* config, mvr_gradcheck_fn callback, void* user) {
  if (!config) return usage("mvr_gradcheck: NULL config");
  return guarded([&] {
    bool ok = true;
    for (const mvrisk::GradCheckLine& l : mvrisk::run_gradcheck(parsed(config))) {
      ok = ok && l.passed;
      if (callback) callback(l.name.c_str(), l.max_rel_error, l.passed ? 1 : 0, user);
    }
    if (!ok) {
      g_last_error = "gradient check exceeded tolerance";
      return MVR_ERR_GRADCHECK_FAILED;
    }
    return MVR_OK;
  });
}

void mvr_free_string(char* s) { std::free(s); }

mvr_status mvr_roc_auc(const double* scores, const uint8_t* labels, size_t n, double* out) {
  if ((!scores || !labels) && n > 0) return usage("mvr_roc_auc: NULL input");
  if (!out) return usage("mvr_roc_auc: NULL output");
  return guarded([&] {
    *out = mvrisk::roc_auc({scores, n}, {labels, n});
    return MVR_OK;
  });
}

mvr_status mvr_auc_pr(const double* scores, const uint8_t* labels, size_t n, double* out) {
  if ((!scores || !labels) && n > 0) return usage("mvr_auc_pr: NULL input");
  if (!out) return usage("mvr_auc_pr: NULL output");
  return guarded([&] {
    *out = mvrisk::auc_pr({scores, n}, {labels, n});
    return MVR_OK;
  });
}

mvr_status mvr_delong(const double* a, const double* b, const uint8_t* labels, size_t n, double* z, double* p) {
  if ((!a || !b || !labels) && n > 0) return usage("mvr_delong: NULL input");
  if (!z || !p) return usage("mvr_delong: NULL output");
  return guarded([&] {
    const mvrisk::DeLongResult r = mvrisk::delong_test({a, n}, {b, n}, {labels, n});
    *z = r.z;
    *p = r.p;
    return MVR_OK;
  });
}

mvr_status mvr_apply_silencing(const double* scores, size_t n, double threshold, int silence_hours, size_t* alarms,
                               size_t* n_alarms) {
  if ((!scores || !alarms) && n > 0) return usage("mvr_apply_silencing: NULL input");
  if (!n_alarms) return usage("mvr_apply_silencing: NULL output");
  return guarded([&] {
    const mvrisk::AlarmTrace t = mvrisk::apply_silencing({scores, n}, threshold, silence_hours);
    std::copy(t.alarms.begin(), t.alarms.end(), alarms);
    *n_alarms = t.alarms.size();
    return MVR_OK;
  });
}

mvr_status mvr_policy_auc(const double* scores, const uint8_t* labels, const size_t* offsets, size_t n_patients,
                          int silence_hours, double* out) {
  if (!offsets || !out) return usage("mvr_policy_auc: NULL argument");
  return guarded([&] {
    mvrisk::ScoredCohort cohort(n_patients);
    for (size_t p = 0; p < n_patients; ++p) {
      if (offsets[p + 1] < offsets[p]) return usage("mvr_policy_auc: offsets must be nondecreasing");
      cohort[p].scores.assign(scores + offsets[p], scores + offsets[p + 1]);
      cohort[p].labels.assign(labels + offsets[p], labels + offsets[p + 1]);
    }
    *out = mvrisk::policy_auc(cohort, silence_hours);
    return MVR_OK;
  });
}

mvr_status mvr_model_load(const char* checkpoint, mvr_model** out) {
  if (!checkpoint || !out) return usage("mvr_model_load: NULL argument");
  return guarded([&] {
    mvrisk::Checkpoint c = mvrisk::load_checkpoint(checkpoint);
    mvrisk::Model m = c.model();
    *out = new mvr_model{std::move(c), std::move(m)};
    return MVR_OK;
  });
}

size_t mvr_model_clinical_width(const mvr_model* model) {
  return model ? model->checkpoint.schema.clinical_width() : 0;
}

size_t mvr_model_comorbidity_width(const mvr_model* model) {
  return model ? model->checkpoint.schema.comorbidity_width() : 0;
}

mvr_status mvr_model_predict(const mvr_model* model, const double* clinical, const double* tslm,
                             const double* comorbidities, size_t rows, double* scores) {
  if (!model || !clinical || !tslm || !scores) return usage("mvr_model_predict: NULL argument");
  if (rows == 0) return MVR_OK;
  return guarded([&] {
    const mvrisk::FeatureSchema& schema = model->checkpoint.schema;
    const mvrisk::Standardizer& st = model->checkpoint.standardizer;
    const size_t C = schema.clinical_width(), M = schema.comorbidity_width(), T = schema.tracked_width();
    if (M > 0 && !comorbidities) return usage("mvr_model_predict: comorbidities required");
    std::vector<mvrisk::HourlyInput> inputs(rows);
    std::vector<mvrisk::WindowRef> refs(rows);
    for (size_t r = 0; r < rows; ++r) {
      mvrisk::HourlyInput& in = inputs[r];
      in.hours = 1;
      in.width = C;
      in.tracked = T;
      in.values.assign(clinical + r * C, clinical + (r + 1) * C);
      for (size_t j = 0; j < C; ++j) in.values[j] = (in.values[j] - st.mean[j]) / st.stddev[j];
      in.tslm.assign(tslm + r * T, tslm + (r + 1) * T);
      if (M > 0) in.comorbidities.assign(comorbidities + r * M, comorbidities + (r + 1) * M);
      in.standardized = true;
      refs[r] = {static_cast<uint32_t>(r), 0};
    }
    const mvrisk::WindowBatch batch = mvrisk::gather_windows(inputs, refs, schema);
    const std::vector<double> out = model->model.predict(batch, 1);
    std::copy(out.begin(), out.end(), scores);
    return MVR_OK;
  });
}

void mvr_model_destroy(mvr_model* model) { delete model; }

}  // extern "C"
