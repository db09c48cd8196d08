/* Copyright 2026 The SelfEmo Authors.
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

/* Stable C interface to the reward, consensus and advantage math and to the
 * pipeline commands. Functions return a status code; on failure a
 * thread-local message is available from selfemo_last_error(). Emotion labels
 * cross the boundary as indices into a vocabulary handle. */

#ifndef SELFEMO_SELFEMO_H_
#define SELFEMO_SELFEMO_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SELFEMO_API __declspec(dllexport)
#else
#define SELFEMO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum selfemo_status {
  SELFEMO_OK = 0,
  SELFEMO_INVALID_ARGUMENT = 1,
  SELFEMO_ALL_INVALID = 2,
  SELFEMO_NONFINITE = 3,
  SELFEMO_UNGRAMMATICAL = 4,
  SELFEMO_DIVERGED = 5,
  SELFEMO_CONFIG = 6,
  SELFEMO_OUTPUT_EXISTS = 7,
  SELFEMO_MISSING_INPUT = 8,
  SELFEMO_IO = 9,
  SELFEMO_RUNTIME = 10
} selfemo_status;

/* Mirrors the rule-gate failure codes, in priority order. */
typedef enum selfemo_parse_failure {
  SELFEMO_PARSE_VALID = -1,
  SELFEMO_PARSE_NO_DICT = 0,
  SELFEMO_PARSE_BAD_KEYS = 1,
  SELFEMO_PARSE_UNKNOWN_LABEL = 2,
  SELFEMO_PARSE_NONPOSITIVE_WEIGHT = 3,
  SELFEMO_PARSE_TOO_MANY_LABELS = 4,
  SELFEMO_PARSE_EMPTY_RESPONSE = 5,
  SELFEMO_PARSE_MALFORMED = 6
} selfemo_parse_failure;

#define SELFEMO_MAX_LABELS 3

SELFEMO_API const char* selfemo_last_error(void);
SELFEMO_API const char* selfemo_status_name(selfemo_status status);
SELFEMO_API const char* selfemo_version(void);

/* ---- vocabulary ---- */

typedef struct selfemo_vocab selfemo_vocab;

SELFEMO_API selfemo_status selfemo_vocab_default(selfemo_vocab** out);
SELFEMO_API selfemo_status selfemo_vocab_create(const char* const* labels, size_t count,
                                                selfemo_vocab** out);
SELFEMO_API void selfemo_vocab_free(selfemo_vocab* vocab);
SELFEMO_API size_t selfemo_vocab_size(const selfemo_vocab* vocab);
/* NULL when index is out of range. */
SELFEMO_API const char* selfemo_vocab_label(const selfemo_vocab* vocab, size_t index);
SELFEMO_API selfemo_status selfemo_vocab_find(const selfemo_vocab* vocab, const char* label,
                                              uint16_t* index);

/* A weighted emotion set as parallel arrays. 1..3 distinct labels, weights
 * strictly positive. */
typedef struct selfemo_set {
  const uint16_t* labels;
  const double* weights;
  size_t size;
} selfemo_set;

/* ---- parse outcome ---- */

typedef struct selfemo_outcome selfemo_outcome;

SELFEMO_API selfemo_status selfemo_parse(const selfemo_vocab* vocab, const char* text,
                                         size_t length, selfemo_outcome** out);
SELFEMO_API void selfemo_outcome_free(selfemo_outcome* outcome);
SELFEMO_API int selfemo_outcome_is_valid(const selfemo_outcome* outcome);
SELFEMO_API selfemo_parse_failure selfemo_outcome_failure(const selfemo_outcome* outcome);
SELFEMO_API const char* selfemo_parse_failure_name(selfemo_parse_failure failure);
/* which: 0 = last_emotions, 1 = my_emotions. 0 for an invalid outcome. */
SELFEMO_API size_t selfemo_outcome_set_size(const selfemo_outcome* outcome, int which);
SELFEMO_API selfemo_status selfemo_outcome_set_entry(const selfemo_outcome* outcome, int which,
                                                     size_t position, uint16_t* label,
                                                     double* weight);
/* NULL for an invalid outcome. */
SELFEMO_API const char* selfemo_outcome_response(const selfemo_outcome* outcome);
/* Canonical dict text; the string must be released with selfemo_string_free. */
SELFEMO_API selfemo_status selfemo_outcome_serialize(const selfemo_outcome* outcome,
                                                     const selfemo_vocab* vocab, char** text);

/* ---- reward math ---- */

/* Writes up to SELFEMO_MAX_LABELS entries summing to one. */
SELFEMO_API selfemo_status selfemo_normalize(const selfemo_set* set, uint16_t* labels,
                                             double* weights, size_t* size);
/* Both sets are normalized first. */
SELFEMO_API selfemo_status selfemo_weighted_iou(const selfemo_set* prediction,
                                                const selfemo_set* label, double* out);
SELFEMO_API selfemo_status selfemo_reward(const selfemo_outcome* outcome,
                                          const selfemo_set* label, double* out);
/* Parse and score in one call. */
SELFEMO_API selfemo_status selfemo_reward_text(const selfemo_vocab* vocab, const char* text,
                                               size_t length, const selfemo_set* label,
                                               double* out);

/* p_tilde and p_star have vocab_size slots; top3 has SELFEMO_MAX_LABELS.
 * Returns SELFEMO_ALL_INVALID when no outcome is valid. */
SELFEMO_API selfemo_status selfemo_consensus(const selfemo_outcome* const* outcomes, size_t count,
                                             size_t vocab_size, double* p_tilde, double* p_star,
                                             uint16_t* top3, size_t* top3_size);
SELFEMO_API selfemo_status selfemo_secondary_reward(const selfemo_outcome* outcome,
                                                    const uint16_t* top3, size_t top3_size,
                                                    double* out);
SELFEMO_API selfemo_status selfemo_lambda_schedule(int64_t step, int64_t total_steps,
                                                   double* out);
SELFEMO_API selfemo_status selfemo_advantages(const double* primary, const double* secondary,
                                              size_t count, double lambda, double* out);
/* grad_scale receives count values. */
SELFEMO_API selfemo_status selfemo_surrogate_loss(const double* new_logprobs,
                                                  const double* old_logprobs,
                                                  const double* advantages, size_t count,
                                                  double epsilon, double* loss,
                                                  double* grad_scale);

/* ---- pipeline ---- */

typedef struct selfemo_config selfemo_config;

SELFEMO_API selfemo_status selfemo_config_load(const char* path, selfemo_config** out);
SELFEMO_API selfemo_status selfemo_config_parse(const char* json, size_t length,
                                                selfemo_config** out);
SELFEMO_API void selfemo_config_free(selfemo_config* config);
SELFEMO_API selfemo_status selfemo_config_set_seed(selfemo_config* config, uint64_t seed);
SELFEMO_API int selfemo_config_iterations(const selfemo_config* config);

SELFEMO_API selfemo_status selfemo_gen_world(const selfemo_config* config, const char* out_dir,
                                             int force);

typedef void (*selfemo_report_fn)(const char* line, void* user);

/* resume_iteration < 0 starts a fresh run. */
SELFEMO_API selfemo_status selfemo_train(const selfemo_config* config, const char* out_dir,
                                         int force, int resume_iteration,
                                         selfemo_report_fn on_report, void* user);
SELFEMO_API selfemo_status selfemo_report(const char* out_dir, char** text);
SELFEMO_API void selfemo_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* SELFEMO_SELFEMO_H_ */
