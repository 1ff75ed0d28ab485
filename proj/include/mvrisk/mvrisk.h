/* Copyright 2026 The mvrisk Authors */
/* SPDX-License-Identifier: Apache-2.0 */
/* */
/* Licensed under the Apache License, Version 2.0 (the "License"); */
/* you may not use this file except in compliance with the License. */
/* You may obtain a copy of the License at */
/* */
/*     https://www.apache.org/licenses/LICENSE-2.0 */
/* */
/* Unless required by applicable law or agreed to in writing, software */
/* distributed under the License is distributed on an "AS IS" BASIS, */
/* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. */
/* See the License for the specific language governing permissions and */
/* limitations under the License. */

#ifndef MVRISK_MVRISK_H_
#define MVRISK_MVRISK_H_

#include <stddef.h>
#include <stdint.h>

#if defined(MVRISK_BUILDING_LIBRARY)
#define MVR_API __attribute__((visibility("default")))
#else
#define MVR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
typedef enum mvr_status {
  MVR_OK = 0,
  MVR_ERR_INTERNAL = 1,
  MVR_ERR_USAGE = 2,
  MVR_ERR_CONFIG = 3,
  MVR_ERR_IO = 4,
  MVR_ERR_SCHEMA_MISMATCH = 5,
  MVR_ERR_INGEST = 6,
  MVR_ERR_UNDEFINED_METRIC = 7,
  MVR_ERR_NUMERIC = 8,
  MVR_ERR_UNATTAINABLE = 9,
  MVR_ERR_GRADCHECK_FAILED = 10
} mvr_status;

typedef struct mvr_config mvr_config;
typedef struct mvr_model mvr_model;

/* Message of the last failure on the calling thread; empty after success. */
MVR_API const char* mvr_last_error(void);
MVR_API const char* mvr_status_name(mvr_status status);
MVR_API const char* mvr_version(void);

/* Run configuration: defaults, then files and key=value overrides. */
MVR_API mvr_status mvr_config_create(mvr_config** out);
MVR_API mvr_status mvr_config_load_file(mvr_config* config, const char* path);
MVR_API mvr_status mvr_config_set(mvr_config* config, const char* assignment);
/* Writes the merged configuration as JSON into buf (NUL-terminated) and the
   full length into *needed. */
MVR_API mvr_status mvr_config_dump(const mvr_config* config, char* buf, size_t size, size_t* needed);
MVR_API void mvr_config_destroy(mvr_config* config);

/* Pipeline commands. Each writes only inside the configured output directory.
   When summary is non-NULL it receives a malloc'd JSON string to release with
   mvr_free_string. */
MVR_API mvr_status mvr_synth(const mvr_config* config, char** summary);
MVR_API mvr_status mvr_ingest(const mvr_config* config, char** summary);
MVR_API mvr_status mvr_train(const mvr_config* config, char** summary);
/* val_auc is NaN for epochs without a validation pass. */
typedef void (*mvr_epoch_fn)(size_t epoch, double train_rmse, double val_auc, void* user);
MVR_API mvr_status mvr_train_with_progress(const mvr_config* config, mvr_epoch_fn callback, void* user,
                                           char** summary);
MVR_API mvr_status mvr_evaluate(const mvr_config* config, const char* checkpoint, char** summary);
MVR_API mvr_status mvr_compare(const mvr_config* config, const char* checkpoint_a, const char* checkpoint_b,
                               char** summary);
MVR_API mvr_status mvr_explain(const mvr_config* config, const char* checkpoint, char** summary);

typedef void (*mvr_gradcheck_fn)(const char* name, double max_rel_error, int passed, void* user);
/* Returns MVR_ERR_GRADCHECK_FAILED when any check exceeds the tolerance. */
MVR_API mvr_status mvr_gradcheck(const mvr_config* config, mvr_gradcheck_fn callback, void* user);

MVR_API void mvr_free_string(char* s);

/* Metrics on raw arrays. labels hold 0/1. */
MVR_API mvr_status mvr_roc_auc(const double* scores, const uint8_t* labels, size_t n, double* out);
MVR_API mvr_status mvr_auc_pr(const double* scores, const uint8_t* labels, size_t n, double* out);
MVR_API mvr_status mvr_delong(const double* scores_a, const double* scores_b, const uint8_t* labels, size_t n,
                              double* z, double* p);
/* Fills alarms (capacity n) and sets *n_alarms. */
MVR_API mvr_status mvr_apply_silencing(const double* scores, size_t n, double threshold, int silence_hours,
                                       size_t* alarms, size_t* n_alarms);
/* patient_offsets has n_patients + 1 entries delimiting each patient's windows. */
MVR_API mvr_status mvr_policy_auc(const double* scores, const uint8_t* labels, const size_t* patient_offsets,
                                  size_t n_patients, int silence_hours, double* out);

/* Checkpoint access. Inputs are raw clinical rows in schema order. */
MVR_API mvr_status mvr_model_load(const char* checkpoint, mvr_model** out);
MVR_API size_t mvr_model_clinical_width(const mvr_model* model);
MVR_API size_t mvr_model_comorbidity_width(const mvr_model* model);
/* rows x clinical_width raw values (standardized internally), rows x tracked
   TSLM hours in tracked-column order, rows x comorbidity_width 0/1 flags. */
MVR_API mvr_status mvr_model_predict(const mvr_model* model, const double* clinical, const double* tslm,
                                     const double* comorbidities, size_t rows, double* scores);
MVR_API void mvr_model_destroy(mvr_model* model);

#ifdef __cplusplus
}
#endif

#endif /* MVRISK_MVRISK_H_ */
