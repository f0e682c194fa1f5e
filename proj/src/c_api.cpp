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

#include "tracescope/tracescope.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "tracescope/analysis.hpp"
#include "tracescope/decoder.hpp"
#include "tracescope/error.hpp"
#include "tracescope/metrics.hpp"
#include "tracescope/report.hpp"
#include "tracescope/trace.hpp"

using tracescope::Error;
using tracescope::ErrorCode;
using tracescope::Fail;
namespace analysis = tracescope::analysis;
namespace decoder = tracescope::decoder;
namespace metrics = tracescope::metrics;
namespace report = tracescope::report;
namespace trace = tracescope::trace;

struct ts_model {
  decoder::Model model;
  std::string id;
};

struct ts_trace {
  std::vector<trace::TraceRow> rows;
  decoder::StopReason stop_reason = decoder::StopReason::kNone;
  std::vector<int32_t> generated;
};

struct ts_summary {
  std::vector<trace::RunSummary> records;
};

namespace {

thread_local std::string g_last_error;

ts_status ToStatus(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return TS_ERROR_INVALID_ARGUMENT;
    case ErrorCode::kData: return TS_ERROR_DATA;
    case ErrorCode::kIo: return TS_ERROR_IO;
    case ErrorCode::kInsufficientData: return TS_ERROR_INSUFFICIENT_DATA;
  }
  return TS_ERROR_INTERNAL;
}

template <typename Fn>
ts_status Guard(Fn&& fn) noexcept {
  try {
    fn();
    return TS_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return ToStatus(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return TS_ERROR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return TS_ERROR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return TS_ERROR_INTERNAL;
  }
}

void Require(bool ok, const char* what) {
  if (!ok) Fail(ErrorCode::kInvalidArgument, what);
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

std::vector<double> ToVector(const double* data, size_t n) {
  Require(data != nullptr || n == 0, "null input array");
  return std::vector<double>(data, data + n);
}

std::vector<int32_t> GeneratedFromRows(std::vector<trace::TraceRow>& rows) {
  trace::SortCanonical(rows);
  std::vector<int32_t> ids;
  if (rows.empty()) return ids;
  const auto& first = rows.front();
  for (const auto& row : rows) {
    if (row.model_id != first.model_id || row.prompt_id != first.prompt_id) break;
    if (row.phase == trace::Phase::kGen && row.layer == trace::kStepSummaryLayer) {
      ids.push_back(static_cast<int32_t>(*row.token_id));
    }
  }
  return ids;
}

ts_trace* WrapRows(std::vector<trace::TraceRow> rows) {
  auto* t = new ts_trace;
  t->generated = GeneratedFromRows(rows);
  t->rows = std::move(rows);
  return t;
}

void ToC(const analysis::DistributionProfile& p, ts_distribution& out) {
  out = {p.mean, p.sd, p.median, p.p10, p.p90, p.min, p.max, p.n};
}

analysis::DistributionProfile FromC(const ts_distribution& d) {
  analysis::DistributionProfile p;
  p.mean = d.mean;
  p.sd = d.sd;
  p.median = d.median;
  p.p10 = d.p10;
  p.p90 = d.p90;
  p.min = d.min;
  p.max = d.max;
  p.n = d.n;
  return p;
}

std::string JoinIds(const int32_t* ids, size_t n) {
  std::string out;
  for (size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

}  // namespace

extern "C" {

const char* ts_version(void) { return "0.1.0"; }

const char* ts_status_string(ts_status status) {
  switch (status) {
    case TS_OK: return "ok";
    case TS_ERROR_INVALID_ARGUMENT: return "invalid argument";
    case TS_ERROR_DATA: return "data error";
    case TS_ERROR_IO: return "i/o error";
    case TS_ERROR_INSUFFICIENT_DATA: return "insufficient data";
    case TS_ERROR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* ts_last_error_message(void) { return g_last_error.c_str(); }

void ts_string_free(char* str) { std::free(str); }

ts_status ts_softmax(const double* logits, size_t n, double* out_probs) {
  return Guard([&] {
    Require(out_probs != nullptr, "null output");
    const auto p = metrics::Softmax(ToVector(logits, n));
    std::copy(p.values().begin(), p.values().end(), out_probs);
  });
}

ts_status ts_shannon_entropy(const double* probs, size_t n, double* out) {
  return Guard([&] {
    Require(out != nullptr, "null output");
    *out = metrics::ShannonEntropy(
        metrics::ProbabilityVector::FromValues(ToVector(probs, n)));
  });
}

ts_status ts_top1_prob(const double* probs, size_t n, double* out) {
  return Guard([&] {
    Require(out != nullptr, "null output");
    *out = metrics::Top1Prob(metrics::ProbabilityVector::FromValues(ToVector(probs, n)));
  });
}

ts_status ts_top1_top2_gap(const double* probs, size_t n, double* out) {
  return Guard([&] {
    Require(out != nullptr, "null output");
    *out = metrics::Top1Top2Gap(
        metrics::ProbabilityVector::FromValues(ToVector(probs, n)));
  });
}

ts_status ts_attention_entropy(const double* weights, size_t num_heads,
                               size_t key_len, double* out_head_entropies,
                               double* out_mean, double* out_hdi) {
  return Guard([&] {
    const auto slice = metrics::AttentionSlice::FromRowMajor(
        ToVector(weights, num_heads * key_len), num_heads, key_len);
    const auto entropies = metrics::AttentionEntropyPerHead(slice);
    if (out_head_entropies) std::copy(entropies.begin(), entropies.end(), out_head_entropies);
    if (out_mean) *out_mean = metrics::LayerAttentionEntropy(entropies);
    if (out_hdi) *out_hdi = metrics::HeadDispersionIndex(entropies);
  });
}

ts_status ts_hidden_l2(const double* h, size_t n, double* out) {
  return Guard([&] {
    Require(out != nullptr, "null output");
    *out = metrics::HiddenL2(metrics::HiddenVector(ToVector(h, n), 0));
  });
}

ts_status ts_delta_l2(const double* a, const double* b, size_t n, double* out) {
  return Guard([&] {
    Require(out != nullptr, "null output");
    *out = metrics::DeltaL2(metrics::HiddenVector(ToVector(a, n), 0),
                            metrics::HiddenVector(ToVector(b, n), 0));
  });
}

ts_status ts_kv_bytes(const ts_kv_shape* shape, int64_t* out_per_layer,
                      int64_t* out_total) {
  return Guard([&] {
    Require(shape != nullptr, "null kv shape");
    const auto bytes = metrics::ComputeKvBytes({shape->num_layers, shape->num_heads,
                                                shape->head_dim, shape->seq_len,
                                                shape->bytes_per_element});
    if (out_per_layer) *out_per_layer = bytes.per_layer;
    if (out_total) *out_total = bytes.total;
  });
}

void ts_model_config_init(ts_model_config* config) {
  if (config == nullptr) return;
  const decoder::ModelConfig d;
  config->vocab_size = d.vocab_size;
  config->num_layers = d.num_layers;
  config->num_heads = d.num_heads;
  config->d_model = d.d_model;
  config->mlp_mult = d.mlp_mult;
  config->bytes_per_element = d.bytes_per_element;
  config->max_positions = d.max_positions;
  config->seed = d.seed;
}

ts_status ts_model_create(const ts_model_config* config, ts_model** out) {
  return Guard([&] {
    Require(config != nullptr && out != nullptr, "null argument");
    decoder::ModelConfig c;
    c.vocab_size = config->vocab_size;
    c.num_layers = config->num_layers;
    c.num_heads = config->num_heads;
    c.d_model = config->d_model;
    c.mlp_mult = config->mlp_mult;
    c.bytes_per_element = config->bytes_per_element;
    c.max_positions = config->max_positions;
    c.seed = config->seed;
    decoder::Model model(c);
    std::string id = model.id();
    *out = new ts_model{std::move(model), std::move(id)};
  });
}

void ts_model_destroy(ts_model* model) { delete model; }

const char* ts_model_id(const ts_model* model) {
  return model ? model->id.c_str() : "";
}

void ts_decode_options_init(ts_decode_options* options) {
  if (options == nullptr) return;
  options->max_steps = 1000;
  options->capture_attention = 1;
  options->capture_hidden = 1;
  options->stop_ids = nullptr;
  options->num_stop_ids = 0;
}

ts_status ts_decode_trace(const ts_model* model, const char* prompt_id,
                          const int32_t* prompt, size_t prompt_len,
                          const ts_decode_options* options, ts_trace** out) {
  return Guard([&] {
    Require(model != nullptr && options != nullptr && out != nullptr, "null argument");
    Require(prompt != nullptr || prompt_len == 0, "null prompt");
    Require(options->stop_ids != nullptr || options->num_stop_ids == 0, "null stop ids");
    decoder::DecodeOptions opts;
    opts.prompt_id = prompt_id ? prompt_id : "p0";
    opts.max_steps = options->max_steps;
    opts.capture_attention = options->capture_attention != 0;
    opts.capture_hidden = options->capture_hidden != 0;
    opts.stop_tokens.assign(options->stop_ids, options->stop_ids + options->num_stop_ids);
    auto result = decoder::GreedyDecodeTrace(
        model->model, std::span<const int32_t>(prompt, prompt_len), opts);
    auto* t = new ts_trace;
    t->rows = std::move(result.rows);
    t->stop_reason = result.stop_reason;
    t->generated = std::move(result.generated_ids);
    *out = t;
  });
}

ts_status ts_trace_read_file(const char* path, ts_trace** out) {
  return Guard([&] {
    Require(path != nullptr && out != nullptr, "null argument");
    *out = WrapRows(trace::ReadTraceFile(path));
  });
}

ts_status ts_trace_parse(const char* text, size_t len, ts_trace** out) {
  return Guard([&] {
    Require((text != nullptr || len == 0) && out != nullptr, "null argument");
    *out = WrapRows(trace::ParseTrace(std::string_view(text, len)));
  });
}

void ts_trace_destroy(ts_trace* trace) { delete trace; }

ts_status ts_trace_write_file(const ts_trace* t, const char* path,
                              uint64_t* out_bytes) {
  return Guard([&] {
    Require(t != nullptr && path != nullptr, "null argument");
    const auto bytes = trace::WriteTraceFile(t->rows, path);
    if (out_bytes) *out_bytes = bytes;
  });
}

ts_status ts_trace_format(const ts_trace* t, char** out_text, size_t* out_len) {
  return Guard([&] {
    Require(t != nullptr && out_text != nullptr, "null argument");
    const std::string text = trace::FormatTrace(t->rows);
    *out_text = CopyString(text);
    if (out_len) *out_len = text.size();
  });
}

ts_stop_reason ts_trace_stop_reason(const ts_trace* t) {
  if (t == nullptr) return TS_STOP_NONE;
  switch (t->stop_reason) {
    case decoder::StopReason::kStopToken: return TS_STOP_TOKEN;
    case decoder::StopReason::kMaxSteps: return TS_STOP_MAX_STEPS;
    case decoder::StopReason::kRepetition: return TS_STOP_REPETITION;
    case decoder::StopReason::kNone: break;
  }
  return TS_STOP_NONE;
}

ts_status ts_trace_generated_ids(const ts_trace* t, const int32_t** out_ids,
                                 size_t* out_len) {
  return Guard([&] {
    Require(t != nullptr && out_ids != nullptr && out_len != nullptr, "null argument");
    *out_ids = t->generated.data();
    *out_len = t->generated.size();
  });
}

size_t ts_trace_row_count(const ts_trace* t) { return t ? t->rows.size() : 0; }

ts_status ts_trace_get_row(const ts_trace* t, size_t index, ts_trace_row* out) {
  return Guard([&] {
    Require(t != nullptr && out != nullptr, "null argument");
    if (index >= t->rows.size()) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("row {} out of range ({} rows)", index, t->rows.size()));
    }
    const auto& r = t->rows[index];
    ts_trace_row row{};
    row.model_id = r.model_id.c_str();
    row.prompt_id = r.prompt_id.c_str();
    row.phase = r.phase == trace::Phase::kPrompt ? TS_PHASE_PROMPT : TS_PHASE_GEN;
    row.step = r.step;
    row.layer = r.layer;
    auto put = [&](const auto& field, auto& slot, uint32_t bit) {
      if (field) {
        slot = *field;
        row.present |= bit;
      }
    };
    put(r.token_id, row.token_id, TS_FIELD_TOKEN_ID);
    put(r.output_entropy, row.output_entropy, TS_FIELD_OUTPUT_ENTROPY);
    put(r.top1_prob, row.top1_prob, TS_FIELD_TOP1_PROB);
    put(r.top1_top2_gap, row.top1_top2_gap, TS_FIELD_TOP1_TOP2_GAP);
    put(r.attn_entropy_mean, row.attn_entropy_mean, TS_FIELD_ATTN_ENTROPY_MEAN);
    put(r.hdi, row.hdi, TS_FIELD_HDI);
    put(r.hidden_l2, row.hidden_l2, TS_FIELD_HIDDEN_L2);
    put(r.delta_l2_prev_layer, row.delta_l2_prev_layer, TS_FIELD_DELTA_L2_PREV_LAYER);
    put(r.delta_l2_prev_step, row.delta_l2_prev_step, TS_FIELD_DELTA_L2_PREV_STEP);
    put(r.kv_layer_bytes, row.kv_layer_bytes, TS_FIELD_KV_LAYER_BYTES);
    put(r.kv_total_bytes, row.kv_total_bytes, TS_FIELD_KV_TOTAL_BYTES);
    *out = row;
  });
}

ts_status ts_summary_create(ts_summary** out) {
  return Guard([&] {
    Require(out != nullptr, "null argument");
    *out = new ts_summary;
  });
}

void ts_summary_destroy(ts_summary* summary) { delete summary; }

ts_status ts_summary_add(ts_summary* summary, const ts_trace* t,
                         const int32_t* prompt, size_t prompt_len,
                         const char* trace_path, const ts_decode_options* options) {
  return Guard([&] {
    Require(summary != nullptr && t != nullptr && options != nullptr, "null argument");
    Require(prompt != nullptr || prompt_len == 0, "null prompt");
    Require(!t->rows.empty(), "empty trace");
    const auto& first = t->rows.front();
    for (const auto& row : t->rows) {
      if (row.model_id != first.model_id || row.prompt_id != first.prompt_id) {
        Fail(ErrorCode::kInvalidArgument, "summary records need a single-prompt trace");
      }
    }
    trace::RunSummary s;
    s.model_id = first.model_id;
    s.prompt_id = first.prompt_id;
    s.prompt_tokens = JoinIds(prompt, prompt_len);
    s.output_tokens = JoinIds(t->generated.data(), t->generated.size());
    s.gen_tokens = static_cast<int64_t>(t->generated.size());
    s.stop_reason = std::string(decoder::StopReasonName(t->stop_reason));
    s.trace_file = trace_path ? trace_path : "";
    s.max_steps = options->max_steps;
    s.capture_attention = options->capture_attention != 0;
    s.capture_hidden = options->capture_hidden != 0;
    for (const auto& existing : summary->records) {
      if (existing.model_id == s.model_id && existing.prompt_id == s.prompt_id) {
        Fail(ErrorCode::kInvalidArgument,
             fmt::format("summary already has model '{}' prompt '{}'", s.model_id,
                         s.prompt_id));
      }
    }
    summary->records.push_back(std::move(s));
  });
}

size_t ts_summary_record_count(const ts_summary* summary) {
  return summary ? summary->records.size() : 0;
}

ts_status ts_summary_write_file(const ts_summary* summary, const char* path,
                                uint64_t* out_bytes) {
  return Guard([&] {
    Require(summary != nullptr && path != nullptr, "null argument");
    const auto bytes = trace::WriteSummaryFile(summary->records, path);
    if (out_bytes) *out_bytes = bytes;
  });
}

ts_status ts_summary_read_file(const char* path, ts_summary** out) {
  return Guard([&] {
    Require(path != nullptr && out != nullptr, "null argument");
    auto records = trace::ReadSummaryFile(path);
    *out = new ts_summary{std::move(records)};
  });
}

ts_status ts_distribution_profile(const double* values, size_t n,
                                  ts_distribution* out) {
  return Guard([&] {
    Require(out != nullptr, "null output");
    ToC(analysis::ComputeDistributionProfile(ToVector(values, n)), *out);
  });
}

ts_status ts_summarize_gen_phase(const ts_trace* t, ts_gen_summary* out) {
  return Guard([&] {
    Require(t != nullptr && out != nullptr, "null argument");
    const analysis::ModelTrace model_trace(t->rows);
    const auto s = analysis::SummarizeGenPhase(model_trace);
    ts_gen_summary g{};
    g.num_prompts = s.num_prompts;
    g.has_prompt_tokens = s.prompt_tokens.has_value();
    g.prompt_tokens = s.prompt_tokens.value_or(0.0);
    g.gen_tokens = s.gen_tokens;
    ToC(s.output_entropy, g.output_entropy);
    ToC(s.top1_prob, g.top1_prob);
    g.top1_top2_gap_mean = s.top1_top2_gap_mean;
    g.has_attention = s.attn_entropy.has_value() && s.hdi.has_value();
    if (g.has_attention) {
      ToC(*s.attn_entropy, g.attn_entropy);
      ToC(*s.hdi, g.hdi);
    }
    g.has_kv = s.kv_total_max_bytes.has_value();
    g.kv_total_max_bytes = s.kv_total_max_bytes.value_or(0);
    *out = g;
  });
}

ts_status ts_early_late_drift(const ts_trace* t, double fraction, ts_drift* out) {
  return Guard([&] {
    Require(t != nullptr && out != nullptr, "null argument");
    const auto d = analysis::EarlyLateDrift(analysis::ModelTrace(t->rows), fraction);
    ts_drift c{};
    c.window_fraction = d.window_fraction;
    c.window_steps = d.window_steps;
    c.output_early = d.output_entropy.early_mean;
    c.output_late = d.output_entropy.late_mean;
    c.output_delta = d.output_entropy.delta;
    c.has_attention = d.attn_entropy.has_value();
    if (d.attn_entropy) {
      c.attn_early = d.attn_entropy->early_mean;
      c.attn_late = d.attn_entropy->late_mean;
      c.attn_delta = d.attn_entropy->delta;
    }
    *out = c;
  });
}

ts_status ts_classify_regime(const ts_drift* drift, const ts_gen_summary* summary,
                             double tau, ts_regime* out) {
  return Guard([&] {
    Require(drift != nullptr && summary != nullptr && out != nullptr, "null argument");
    analysis::DriftReport d;
    d.window_fraction = drift->window_fraction;
    d.window_steps = drift->window_steps;
    d.output_entropy = {drift->output_early, drift->output_late, drift->output_delta};
    analysis::SummaryProfile s;
    s.output_entropy = FromC(summary->output_entropy);
    const auto label = analysis::ClassifyRegime(d, s, tau);
    switch (label.label) {
      case analysis::Regime::kDeterministic: *out = TS_REGIME_DETERMINISTIC; break;
      case analysis::Regime::kExploratory: *out = TS_REGIME_EXPLORATORY; break;
      case analysis::Regime::kBalanced: *out = TS_REGIME_BALANCED; break;
    }
  });
}

const char* ts_regime_name(ts_regime regime) {
  switch (regime) {
    case TS_REGIME_DETERMINISTIC: return "deterministic";
    case TS_REGIME_EXPLORATORY: return "exploratory";
    case TS_REGIME_BALANCED: return "balanced";
  }
  return "unknown";
}

ts_status ts_inter_rater_agreement(const char* const* labels_a,
                                   const char* const* labels_b, size_t n,
                                   double* out_percent, double* out_kappa,
                                   int* out_kappa_defined) {
  return Guard([&] {
    Require((labels_a != nullptr && labels_b != nullptr) || n == 0, "null labels");
    std::vector<std::string> a, b;
    for (size_t i = 0; i < n; ++i) {
      Require(labels_a[i] != nullptr && labels_b[i] != nullptr, "null label");
      a.emplace_back(labels_a[i]);
      b.emplace_back(labels_b[i]);
    }
    const auto r = analysis::InterRaterAgreement(a, b);
    if (out_percent) *out_percent = r.percent_agreement;
    if (out_kappa) *out_kappa = r.cohen_kappa.value_or(0.0);
    if (out_kappa_defined) *out_kappa_defined = r.cohen_kappa.has_value() ? 1 : 0;
  });
}

void ts_report_options_init(ts_report_options* options) {
  if (options == nullptr) return;
  const report::ReportOptions d;
  options->sections = d.sections;
  options->fraction = d.fraction;
  options->tau = d.tau;
  options->extremal_k = d.extremal_k;
  options->per_model_correlation = 0;
}

ts_status ts_parse_sections(const char* list, uint32_t* out_mask) {
  return Guard([&] {
    Require(list != nullptr && out_mask != nullptr, "null argument");
    *out_mask = report::ParseSections(list);
  });
}

ts_status ts_render_report(const ts_trace* const* traces, size_t n,
                           ts_report_kind kind, const ts_report_options* options,
                           char** out_text, char** out_kv) {
  return Guard([&] {
    Require(traces != nullptr && options != nullptr, "null argument");
    std::vector<std::vector<trace::TraceRow>> inputs;
    for (size_t i = 0; i < n; ++i) {
      Require(traces[i] != nullptr, "null trace");
      inputs.push_back(traces[i]->rows);
    }
    report::ReportOptions opts;
    opts.sections = options->sections;
    opts.fraction = options->fraction;
    opts.tau = options->tau;
    opts.extremal_k = options->extremal_k;
    opts.granularity = options->per_model_correlation
                           ? analysis::CorrelationGranularity::kPerModel
                           : analysis::CorrelationGranularity::kPerStep;
    Require(opts.extremal_k >= 1, "extremal_k must be >= 1");
    report::Report r;
    if (kind == TS_REPORT_COMPARE) {
      const auto columns = report::ColumnsPerInput(std::move(inputs));
      r = report::RenderComparison(columns, opts);
    } else {
      const auto columns = report::ColumnsByModel(std::move(inputs));
      r = report::RenderAnalysis(columns, opts);
    }
    char* text = CopyString(r.text);
    char* kv = nullptr;
    try {
      kv = CopyString(r.kv);
    } catch (...) {
      std::free(text);
      throw;
    }
    if (out_text) {
      *out_text = text;
    } else {
      std::free(text);
    }
    if (out_kv) {
      *out_kv = kv;
    } else {
      std::free(kv);
    }
  });
}

}  // extern "C"
