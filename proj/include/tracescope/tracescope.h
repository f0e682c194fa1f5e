// Copyright 2026 The Tracescope Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/*
 * C interface to tracescope.
 *
 * Every fallible call returns a ts_status. On failure, ts_last_error_message()
 * describes the problem; the message is thread-local and valid until the next
 * failing call on the same thread. Objects are opaque handles owned by the
 * caller and released with the matching *_destroy function. Strings returned
 * through char** parameters are released with ts_string_free.
 *
 * Handles are not synchronized: use one handle from one thread at a time.
 * Distinct handles (including traces decoded from one shared model) may be
 * used concurrently; a model is read-only after creation.
 */
#ifndef TRACESCOPE_TRACESCOPE_H_
#define TRACESCOPE_TRACESCOPE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(TS_BUILDING_LIBRARY)
#define TS_API __attribute__((visibility("default")))
#else
#define TS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ts_status {
  TS_OK = 0,
  TS_ERROR_INVALID_ARGUMENT = 1,
  TS_ERROR_DATA = 2,
  TS_ERROR_IO = 3,
  TS_ERROR_INSUFFICIENT_DATA = 4,
  TS_ERROR_INTERNAL = 5
} ts_status;

TS_API const char* ts_version(void);
TS_API const char* ts_status_string(ts_status status);
TS_API const char* ts_last_error_message(void);
TS_API void ts_string_free(char* str);

/* ---- Metrics (entropies in nats) -------------------------------------- */

TS_API ts_status ts_softmax(const double* logits, size_t n, double* out_probs);
TS_API ts_status ts_shannon_entropy(const double* probs, size_t n, double* out);
TS_API ts_status ts_top1_prob(const double* probs, size_t n, double* out);
TS_API ts_status ts_top1_top2_gap(const double* probs, size_t n, double* out);

/* `weights` is row-major [num_heads x key_len]; out_head_entropies has
 * num_heads slots and may be NULL. */
TS_API ts_status ts_attention_entropy(const double* weights, size_t num_heads,
                                      size_t key_len, double* out_head_entropies,
                                      double* out_mean, double* out_hdi);
TS_API ts_status ts_hidden_l2(const double* h, size_t n, double* out);
TS_API ts_status ts_delta_l2(const double* a, const double* b, size_t n,
                             double* out);

typedef struct ts_kv_shape {
  int64_t num_layers;
  int64_t num_heads;
  int64_t head_dim;
  int64_t seq_len;
  int64_t bytes_per_element;
} ts_kv_shape;

TS_API ts_status ts_kv_bytes(const ts_kv_shape* shape, int64_t* out_per_layer,
                             int64_t* out_total);

/* ---- Toy decoder ------------------------------------------------------- */

typedef struct ts_model_config {
  int32_t vocab_size;
  int32_t num_layers;
  int32_t num_heads;
  int32_t d_model;
  int32_t mlp_mult;
  int32_t bytes_per_element; /* 2 or 4 */
  int32_t max_positions;
  uint64_t seed;
} ts_model_config;

TS_API void ts_model_config_init(ts_model_config* config);

typedef struct ts_model ts_model;

TS_API ts_status ts_model_create(const ts_model_config* config, ts_model** out);
TS_API void ts_model_destroy(ts_model* model);
/* Borrowed; valid for the model's lifetime. */
TS_API const char* ts_model_id(const ts_model* model);

typedef struct ts_decode_options {
  int64_t max_steps; /* default 1000 */
  int capture_attention;
  int capture_hidden;
  const int32_t* stop_ids;
  size_t num_stop_ids;
} ts_decode_options;

TS_API void ts_decode_options_init(ts_decode_options* options);

typedef enum ts_stop_reason {
  TS_STOP_NONE = 0, /* trace not produced by a decode */
  TS_STOP_TOKEN = 1,
  TS_STOP_MAX_STEPS = 2,
  TS_STOP_REPETITION = 3
} ts_stop_reason;

/* ---- Traces ------------------------------------------------------------ */

typedef struct ts_trace ts_trace;

TS_API ts_status ts_decode_trace(const ts_model* model, const char* prompt_id,
                                 const int32_t* prompt, size_t prompt_len,
                                 const ts_decode_options* options,
                                 ts_trace** out);
TS_API ts_status ts_trace_read_file(const char* path, ts_trace** out);
TS_API ts_status ts_trace_parse(const char* text, size_t len, ts_trace** out);
TS_API void ts_trace_destroy(ts_trace* trace);

/* Atomic write (temporary file + rename). */
TS_API ts_status ts_trace_write_file(const ts_trace* trace, const char* path,
                                     uint64_t* out_bytes);
TS_API ts_status ts_trace_format(const ts_trace* trace, char** out_text,
                                 size_t* out_len);

TS_API ts_stop_reason ts_trace_stop_reason(const ts_trace* trace);
/* Token ids of the GEN steps of the trace's first prompt, in step order.
 * Borrowed; valid for the trace's lifetime. */
TS_API ts_status ts_trace_generated_ids(const ts_trace* trace,
                                        const int32_t** out_ids,
                                        size_t* out_len);
TS_API size_t ts_trace_row_count(const ts_trace* trace);

typedef enum ts_phase { TS_PHASE_PROMPT = 0, TS_PHASE_GEN = 1 } ts_phase;

enum {
  TS_FIELD_TOKEN_ID = 1u << 0,
  TS_FIELD_OUTPUT_ENTROPY = 1u << 1,
  TS_FIELD_TOP1_PROB = 1u << 2,
  TS_FIELD_TOP1_TOP2_GAP = 1u << 3,
  TS_FIELD_ATTN_ENTROPY_MEAN = 1u << 4,
  TS_FIELD_HDI = 1u << 5,
  TS_FIELD_HIDDEN_L2 = 1u << 6,
  TS_FIELD_DELTA_L2_PREV_LAYER = 1u << 7,
  TS_FIELD_DELTA_L2_PREV_STEP = 1u << 8,
  TS_FIELD_KV_LAYER_BYTES = 1u << 9,
  TS_FIELD_KV_TOTAL_BYTES = 1u << 10
};

/* Fields not flagged in `present` hold 0. Strings are borrowed. */
typedef struct ts_trace_row {
  const char* model_id;
  const char* prompt_id;
  ts_phase phase;
  int64_t step;
  int64_t layer; /* -1 = step summary, 0 = embedding, 1..L = blocks */
  uint32_t present;
  int64_t token_id;
  double output_entropy;
  double top1_prob;
  double top1_top2_gap;
  double attn_entropy_mean;
  double hdi;
  double hidden_l2;
  double delta_l2_prev_layer;
  double delta_l2_prev_step;
  int64_t kv_layer_bytes;
  int64_t kv_total_bytes;
} ts_trace_row;

TS_API ts_status ts_trace_get_row(const ts_trace* trace, size_t index,
                                  ts_trace_row* out);

/* ---- Run summary ------------------------------------------------------- */

typedef struct ts_summary ts_summary;

TS_API ts_status ts_summary_create(ts_summary** out);
TS_API void ts_summary_destroy(ts_summary* summary);
/* Adds the record of a single-prompt trace, echoing the prompt tokens, the
 * trace path and the decode options. */
TS_API ts_status ts_summary_add(ts_summary* summary, const ts_trace* trace,
                                const int32_t* prompt, size_t prompt_len,
                                const char* trace_path,
                                const ts_decode_options* options);
TS_API size_t ts_summary_record_count(const ts_summary* summary);
TS_API ts_status ts_summary_write_file(const ts_summary* summary,
                                       const char* path, uint64_t* out_bytes);
TS_API ts_status ts_summary_read_file(const char* path, ts_summary** out);

/* ---- Analyses ---------------------------------------------------------- */

typedef struct ts_distribution {
  double mean, sd, median, p10, p90, min, max;
  uint64_t n;
} ts_distribution;

TS_API ts_status ts_distribution_profile(const double* values, size_t n,
                                         ts_distribution* out);

/* The trace must hold a single model. Optional members are flagged. */
typedef struct ts_gen_summary {
  uint64_t num_prompts;
  int has_prompt_tokens;
  double prompt_tokens;
  uint64_t gen_tokens;
  ts_distribution output_entropy;
  ts_distribution top1_prob;
  double top1_top2_gap_mean;
  int has_attention;
  ts_distribution attn_entropy;
  ts_distribution hdi;
  int has_kv;
  int64_t kv_total_max_bytes;
} ts_gen_summary;

TS_API ts_status ts_summarize_gen_phase(const ts_trace* trace,
                                        ts_gen_summary* out);

typedef struct ts_drift {
  double window_fraction;
  uint64_t window_steps;
  double output_early, output_late, output_delta;
  int has_attention;
  double attn_early, attn_late, attn_delta;
} ts_drift;

TS_API ts_status ts_early_late_drift(const ts_trace* trace, double fraction,
                                     ts_drift* out);

typedef enum ts_regime {
  TS_REGIME_DETERMINISTIC = 0,
  TS_REGIME_EXPLORATORY = 1,
  TS_REGIME_BALANCED = 2
} ts_regime;

TS_API ts_status ts_classify_regime(const ts_drift* drift,
                                    const ts_gen_summary* summary, double tau,
                                    ts_regime* out);
TS_API const char* ts_regime_name(ts_regime regime);

/* kappa_defined is 0 when chance agreement is 1 (kappa left at 0). */
TS_API ts_status ts_inter_rater_agreement(const char* const* labels_a,
                                          const char* const* labels_b, size_t n,
                                          double* out_percent,
                                          double* out_kappa,
                                          int* out_kappa_defined);

/* ---- Reports ----------------------------------------------------------- */

enum {
  TS_SECTION_SUMMARY = 1u << 0,
  TS_SECTION_DISTRIBUTION = 1u << 1,
  TS_SECTION_LAYERS = 1u << 2,
  TS_SECTION_DRIFT = 1u << 3,
  TS_SECTION_EXTREMAL = 1u << 4,
  TS_SECTION_HIDDEN = 1u << 5,
  TS_SECTION_CORRELATION = 1u << 6,
  TS_SECTION_REGIME = 1u << 7,
  TS_SECTION_ALL = (1u << 8) - 1
};

typedef enum ts_report_kind {
  TS_REPORT_ANALYZE = 0, /* one column per model id, inputs merged */
  TS_REPORT_COMPARE = 1  /* one column per input; needs >= 2 */
} ts_report_kind;

typedef struct ts_report_options {
  uint32_t sections;
  double fraction;
  double tau;
  int32_t extremal_k;
  int per_model_correlation; /* 0: per-step records, 1: per-model means */
} ts_report_options;

TS_API void ts_report_options_init(ts_report_options* options);
/* "summary,drift" or "all". */
TS_API ts_status ts_parse_sections(const char* list, uint32_t* out_mask);
TS_API ts_status ts_render_report(const ts_trace* const* traces, size_t n,
                                  ts_report_kind kind,
                                  const ts_report_options* options,
                                  char** out_text, char** out_kv);

#ifdef __cplusplus
}
#endif

#endif /* TRACESCOPE_TRACESCOPE_H_ */
