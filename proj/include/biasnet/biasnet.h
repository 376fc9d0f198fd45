/*
 * Copyright 2026 The biasnet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the biasnet library.
 *
 * Every fallible call returns a bn_status. On failure the message is
 * available from bn_last_error() on the same thread until the next call.
 * Handles are opaque and released with their matching _free function.
 * Configs and results are JSON documents passed as UTF-8 strings.
 */

#ifndef BIASNET_BIASNET_H_
#define BIASNET_BIASNET_H_

#include <stddef.h>

#if defined(_WIN32)
#if defined(BIASNET_BUILDING_LIBRARY)
#define BN_API __declspec(dllexport)
#else
#define BN_API __declspec(dllimport)
#endif
#else
#define BN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bn_status {
  BN_OK = 0,
  BN_ERR_INVALID_ARGUMENT = 1,
  BN_ERR_IO = 2,
  BN_ERR_PARSE = 3,
  BN_ERR_INFEASIBLE = 4,
  BN_ERR_NUMERIC = 5,
  BN_ERR_INTERNAL = 6
} bn_status;

typedef enum bn_log_level {
  BN_LOG_DEBUG = 0,
  BN_LOG_INFO = 1,
  BN_LOG_WARN = 2,
  BN_LOG_ERROR = 3,
  BN_LOG_OFF = 4
} bn_log_level;

/* JSON text produced by a call. */
typedef struct bn_result bn_result;
/* A loaded checkpoint. */
typedef struct bn_model bn_model;

BN_API const char* bn_version(void);
BN_API const char* bn_status_name(bn_status status);
/* Message of the last failed call on this thread; "" if none. */
BN_API const char* bn_last_error(void);
/* Logs go to stderr. */
BN_API void bn_set_log_level(bn_log_level level);

BN_API const char* bn_result_json(const bn_result* result);
BN_API void bn_result_free(bn_result* result);

/* Full default config of a command, with required paths set to "". */
BN_API bn_status bn_command_defaults(const char* command, bn_result** out);
/* Defaults overlaid with config_json; rejects unknown keys. */
BN_API bn_status bn_resolve_config(const char* command, const char* config_json,
                                   bn_result** out);
/* Runs a command by name; out receives its JSON summary. */
BN_API bn_status bn_run_command(const char* command, const char* config_json, bn_result** out);

BN_API bn_status bn_prepare_data(const char* config_json, bn_result** out);
BN_API bn_status bn_train(const char* config_json, bn_result** out);
BN_API bn_status bn_evaluate(const char* config_json, bn_result** out);
BN_API bn_status bn_stats(const char* config_json, bn_result** out);
BN_API bn_status bn_analyze_structure(const char* config_json, bn_result** out);
BN_API bn_status bn_extract_main_sentences(const char* config_json, bn_result** out);

BN_API bn_status bn_model_load(const char* path, bn_model** out);
BN_API void bn_model_free(bn_model* model);
BN_API int bn_model_encoder_dim(const bn_model* model);
BN_API int bn_model_num_classes(const bn_model* model);
/* embeddings: rows x cols, row-major, row 0 the headline. probs receives
 * num_classes mixture probabilities. */
BN_API bn_status bn_model_predict(const bn_model* model, const double* embeddings, size_t rows,
                                  size_t cols, double* probs);

BN_API bn_status bn_t_test(const double* a, size_t na, const double* b, size_t nb, int pooled,
                           double* t, double* p);
BN_API bn_status bn_f_test(const double* baseline, size_t nb, const double* ours, size_t no,
                           double* f0, double* p);
BN_API bn_status bn_shapiro_wilk(const double* x, size_t n, double* w, double* p);
BN_API bn_status bn_jsd_gaussian(double mean_a, double std_a, double mean_b, double std_b,
                                 double* jsd);
BN_API bn_status bn_dtw_distance(const double* a, size_t na, const double* b, size_t nb,
                                 double* distance);

#ifdef __cplusplus
}
#endif

#endif /* BIASNET_BIASNET_H_ */
