/* Copyright 2026 The Skyline Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the skyline scheduling engine.
 *
 * Objects are opaque handles created by sky_*_create/load/generate functions
 * and released with the matching sky_*_free. Every fallible call returns a
 * sky_status; on failure a human-readable message is available from
 * sky_last_error() on the calling thread until the next failing call.
 *
 * Handles are not synchronised. Distinct handles may be used from distinct
 * threads; read-only handles (corpus, calibration, policy) may be shared.
 */

#ifndef SKYLINE_SKYLINE_H_
#define SKYLINE_SKYLINE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SKY_API __declspec(dllexport)
#else
#define SKY_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sky_status {
  SKY_OK = 0,
  SKY_ERR_INVALID_ARGUMENT = 1,
  SKY_ERR_IO = 2,
  SKY_ERR_PARSE = 3, /* malformed file or violated trace invariant */
  SKY_ERR_NUMERIC = 4,
  SKY_ERR_INTERNAL = 5
} sky_status;

typedef struct sky_corpus sky_corpus;
typedef struct sky_calibration sky_calibration;
typedef struct sky_policy sky_policy;
typedef struct sky_report sky_report;
typedef struct sky_history sky_history;

SKY_API const char* sky_last_error(void);
SKY_API const char* sky_status_name(sky_status status);

/* ---- corpus ------------------------------------------------------------ */

typedef struct sky_generator_config {
  int n_passages;
  int n_layers;
  uint64_t seed;
  double decay_a, decay_b, decay_c; /* P(answer|rank) = a*exp(-b(rank-1)) + c */
  double drift;
  double noise_sd;
  double extraction_reliability;
} sky_generator_config;

SKY_API sky_generator_config sky_generator_config_default(void);
SKY_API sky_status sky_corpus_generate(const sky_generator_config* config,
                                       size_t count, sky_corpus** out);
SKY_API sky_status sky_corpus_load(const char* path, sky_corpus** out);
SKY_API sky_status sky_corpus_save(const sky_corpus* corpus, const char* path);
SKY_API void sky_corpus_free(sky_corpus* corpus);
SKY_API size_t sky_corpus_size(const sky_corpus* corpus);
/* Passages and layers of the first question; 0 for an empty corpus. */
SKY_API int sky_corpus_passages(const sky_corpus* corpus);
SKY_API int sky_corpus_layers(const sky_corpus* corpus);
/* Borrowed pointer, valid while the corpus lives. */
SKY_API const char* sky_corpus_question_id(const sky_corpus* corpus,
                                           size_t index);
/* New corpus holding the questions at `indices`, in that order. */
SKY_API sky_status sky_corpus_subset(const sky_corpus* corpus,
                                     const size_t* indices, size_t count,
                                     sky_corpus** out);

/* ---- calibration ------------------------------------------------------- */

/* grid == NULL selects the default 32-point log grid on [0.25, 8]. */
SKY_API sky_status sky_calibration_fit(const sky_corpus* dev,
                                       const double* grid, size_t grid_len,
                                       sky_calibration** out);
SKY_API sky_status sky_calibration_identity(int n_layers,
                                            sky_calibration** out);
SKY_API sky_status sky_calibration_load(const char* path,
                                        sky_calibration** out);
SKY_API sky_status sky_calibration_save(const sky_calibration* calib,
                                        const char* path);
SKY_API void sky_calibration_free(sky_calibration* calib);
SKY_API int sky_calibration_layers(const sky_calibration* calib);
SKY_API double sky_calibration_temperature(const sky_calibration* calib,
                                           int layer);
/* Summed NLL of the calibrated (or, with calib == NULL, raw) logits. */
SKY_API sky_status sky_calibration_nll(const sky_calibration* calib,
                                       const sky_corpus* dev, double* out);

/* ---- policy ------------------------------------------------------------ */

SKY_API sky_status sky_policy_create(int d, int n_layers, int n_max,
                                     uint64_t seed, int learnable_init,
                                     sky_policy** out);
SKY_API sky_status sky_policy_load(const char* path, sky_policy** out);
SKY_API sky_status sky_policy_save(const sky_policy* policy, const char* path);
SKY_API void sky_policy_free(sky_policy* policy);
SKY_API size_t sky_policy_parameter_count(const sky_policy* policy);

/* ---- training ---------------------------------------------------------- */

typedef struct sky_train_config {
  double lr;
  int batch_size;
  int epochs;
  int max_steps;
  double step_cost;
  double gamma;
  uint64_t seed;
  int use_baseline;
  int eval_budget; /* 0: same as max_steps */
} sky_train_config;

SKY_API sky_train_config sky_train_config_default(void);
/* held_out may be NULL. history may be NULL. */
SKY_API sky_status sky_train(const sky_corpus* corpus,
                             const sky_corpus* held_out,
                             const sky_policy* init,
                             const sky_train_config* config,
                             const sky_calibration* calib, sky_policy** out,
                             sky_history** history);
SKY_API size_t sky_history_epochs(const sky_history* history);
SKY_API sky_status sky_history_epoch(const sky_history* history, size_t index,
                                     double* mean_return, double* held_out_hap,
                                     double* wall_time_ms);
SKY_API sky_status sky_history_save_csv(const sky_history* history,
                                        const char* path);
SKY_API void sky_history_free(sky_history* history);

/* ---- scheduling and evaluation ------------------------------------------ */

typedef enum sky_strategy {
  SKY_STRATEGY_STANDARD = 0,
  SKY_STRATEGY_EFFICIENT = 1,
  SKY_STRATEGY_TOP_K = 2,
  SKY_STRATEGY_TOWER_BUILDER = 3,
  SKY_STRATEGY_GREEDY = 4,
  SKY_STRATEGY_POLICY = 5,
  SKY_STRATEGY_RANDOM = 6
} sky_strategy;

typedef enum sky_output_mode {
  SKY_OUTPUT_LAST_LAYER = 0,
  SKY_OUTPUT_ANY_LAYER = 1
} sky_output_mode;

typedef enum sky_init_rule {
  SKY_INIT_RANK_ORDER = 0,
  SKY_INIT_CONSTANT = 1
} sky_init_rule;

typedef struct sky_scheduler_config {
  sky_strategy strategy;
  double param; /* tau, budget, k; unused for standard */
  int m;
  sky_output_mode output_mode;
  sky_init_rule init_rule;   /* greedy */
  const sky_policy* policy;  /* policy */
  int sample_actions;        /* policy: 0 greedy, 1 sample */
  uint64_t seed;             /* policy sampling and random */
} sky_scheduler_config;

SKY_API sky_scheduler_config sky_scheduler_config_default(void);

typedef struct sky_eval_point {
  double budget_param;
  double avg_layers;
  double accuracy;
  double scheduler_layers;
  double unroll_layers;
  double var_h;
  double avg_rank;
  double flips; /* NaN when not applicable */
  double h_plus_minus;
  double hap;
} sky_eval_point;

/* One evaluation point per entry of `params` (config->param is ignored). */
SKY_API sky_status sky_sweep(const sky_corpus* corpus,
                             const sky_scheduler_config* config,
                             const double* params, size_t param_count,
                             const sky_calibration* calib, sky_report** out);
/* A single point at config->param. */
SKY_API sky_status sky_evaluate(const sky_corpus* corpus,
                                const sky_scheduler_config* config,
                                const sky_calibration* calib,
                                sky_report** out);
SKY_API size_t sky_report_size(const sky_report* report);
SKY_API sky_status sky_report_point(const sky_report* report, size_t index,
                                    sky_eval_point* out);
/* Either path may be NULL. */
SKY_API sky_status sky_report_save(const sky_report* report,
                                   const char* json_path, const char* csv_path);
/* reachable receives 0 when the target accuracy is never reached. */
SKY_API sky_status sky_report_reduction(const sky_report* report,
                                        double target_fraction,
                                        double* avg_layers, double* factor,
                                        int* reachable);
SKY_API void sky_report_free(sky_report* report);

/* JSON array of per-question schedule logs for `config` at config->param. */
SKY_API sky_status sky_schedule_logs_save(const sky_corpus* corpus,
                                          const sky_scheduler_config* config,
                                          const sky_calibration* calib,
                                          const char* path);

#ifdef __cplusplus
}
#endif

#endif /* SKYLINE_SKYLINE_H_ */
