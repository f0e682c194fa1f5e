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

#include "tracescope/trace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/core.h>

#include "csv.hpp"
#include "tracescope/error.hpp"
#include "tracescope/file_util.hpp"

namespace tracescope::trace {
namespace {

enum Column {
  kModelId, kPromptId, kPhase, kStep, kLayer, kTokenId, kOutputEntropy,
  kTop1Prob, kTop1Top2Gap, kAttnEntropyMean, kHdi, kHiddenL2,
  kDeltaL2PrevLayer, kDeltaL2PrevStep, kKvLayerBytes, kKvTotalBytes,
  kNumColumns,
};

std::string Where(const std::vector<std::size_t>* line_of, std::size_t index) {
  if (line_of == nullptr) return fmt::format("row {}", index);
  return fmt::format("line {}", (*line_of)[index]);
}

std::string Describe(const TraceRow& row) {
  return fmt::format("prompt '{}' {} step {} layer {}", row.prompt_id,
                     PhaseName(row.phase), row.step, row.layer);
}

void AppendOptional(std::string& out, const std::optional<double>& v) {
  if (v) out += csv::FormatDouble(*v);
}

void AppendOptional(std::string& out, const std::optional<std::int64_t>& v) {
  if (v) out += std::to_string(*v);
}

void CheckRow(const TraceRow& row, const std::string& where) {
  auto fail = [&](const std::string& what) {
    Fail(ErrorCode::kData, fmt::format("{}: {} ({})", where, what, Describe(row)));
  };
  if (row.model_id.empty()) fail("empty model_id");
  if (row.prompt_id.empty()) fail("empty prompt_id");
  if (row.phase == Phase::kPrompt && row.step != 0) fail("PROMPT rows must have step 0");
  if (row.phase == Phase::kGen && row.step < 1) fail("GEN rows must have step >= 1");
  if (row.layer < kStepSummaryLayer) fail("layer must be >= -1");

  const bool summary = row.layer == kStepSummaryLayer;
  const bool block = row.layer >= 1;
  auto only = [&](bool present, bool allowed, const char* name) {
    if (present && !allowed) fail(fmt::format("field {} not allowed here", name));
  };
  only(row.token_id.has_value(), summary && row.phase == Phase::kGen, "token_id");
  only(row.output_entropy.has_value(), summary, "output_entropy");
  only(row.top1_prob.has_value(), summary, "top1_prob");
  only(row.top1_top2_gap.has_value(), summary, "top1_top2_gap");
  only(row.attn_entropy_mean.has_value(), block, "attn_entropy_mean");
  only(row.hdi.has_value(), block, "hdi");
  only(row.hidden_l2.has_value(), !summary, "hidden_l2");
  only(row.delta_l2_prev_layer.has_value(), block, "delta_l2_prev_layer");
  only(row.delta_l2_prev_step.has_value(),
       !summary && row.phase == Phase::kGen && row.step >= 2, "delta_l2_prev_step");
  only(row.kv_layer_bytes.has_value(), block, "kv_layer_bytes");
  only(row.kv_total_bytes.has_value(), summary, "kv_total_bytes");

  if (summary) {
    if (row.phase == Phase::kGen && !row.token_id) fail("GEN step-summary row needs token_id");
    if (!row.output_entropy || !row.top1_prob || !row.top1_top2_gap) {
      fail("step-summary row needs output_entropy, top1_prob and top1_top2_gap");
    }
  }

  auto non_negative = [&](const std::optional<double>& v, const char* name) {
    if (v && (!std::isfinite(*v) || *v < 0.0)) {
      fail(fmt::format("{} must be finite and >= 0", name));
    }
  };
  non_negative(row.output_entropy, "output_entropy");
  non_negative(row.top1_prob, "top1_prob");
  non_negative(row.top1_top2_gap, "top1_top2_gap");
  non_negative(row.attn_entropy_mean, "attn_entropy_mean");
  non_negative(row.hdi, "hdi");
  non_negative(row.hidden_l2, "hidden_l2");
  non_negative(row.delta_l2_prev_layer, "delta_l2_prev_layer");
  non_negative(row.delta_l2_prev_step, "delta_l2_prev_step");
  if ((row.top1_prob && *row.top1_prob > 1.0) ||
      (row.top1_top2_gap && *row.top1_top2_gap > 1.0)) {
    fail("probabilities must be <= 1");
  }
  if (row.token_id && *row.token_id < 0) fail("token_id must be >= 0");
  if (row.kv_layer_bytes && *row.kv_layer_bytes < 0) fail("kv_layer_bytes must be >= 0");
  if (row.kv_total_bytes && *row.kv_total_bytes < 0) fail("kv_total_bytes must be >= 0");
}

using GroupKey = std::pair<std::string, std::string>;
using StepKey = std::pair<Phase, std::int64_t>;

struct StepInfo {
  std::map<std::int64_t, std::size_t> layers;  // layer -> row index
  bool has_hidden = false;
};

std::string SerializeRow(const TraceRow& row) {
  std::string line;
  csv::AppendField(line, row.model_id);
  line += ',';
  csv::AppendField(line, row.prompt_id);
  line += ',';
  line += PhaseName(row.phase);
  line += ',';
  line += std::to_string(row.step);
  line += ',';
  line += std::to_string(row.layer);
  line += ',';
  AppendOptional(line, row.token_id);
  line += ',';
  AppendOptional(line, row.output_entropy);
  line += ',';
  AppendOptional(line, row.top1_prob);
  line += ',';
  AppendOptional(line, row.top1_top2_gap);
  line += ',';
  AppendOptional(line, row.attn_entropy_mean);
  line += ',';
  AppendOptional(line, row.hdi);
  line += ',';
  AppendOptional(line, row.hidden_l2);
  line += ',';
  AppendOptional(line, row.delta_l2_prev_layer);
  line += ',';
  AppendOptional(line, row.delta_l2_prev_step);
  line += ',';
  AppendOptional(line, row.kv_layer_bytes);
  line += ',';
  AppendOptional(line, row.kv_total_bytes);
  line += '\n';
  return line;
}

std::string JoinHeader(const std::vector<std::string>& columns) {
  std::string header;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) header += ',';
    header += columns[i];
  }
  header += '\n';
  return header;
}

bool ParseBool(std::string_view text, bool& out) {
  if (text == "true") {
    out = true;
    return true;
  }
  if (text == "false") {
    out = false;
    return true;
  }
  return false;
}

}  // namespace

std::string_view PhaseName(Phase phase) {
  return phase == Phase::kPrompt ? "PROMPT" : "GEN";
}

const std::vector<std::string>& TraceColumns() {
  static const std::vector<std::string> columns = {
      "model_id",        "prompt_id",          "phase",
      "step",            "layer",              "token_id",
      "output_entropy",  "top1_prob",          "top1_top2_gap",
      "attn_entropy_mean", "hdi",              "hidden_l2",
      "delta_l2_prev_layer", "delta_l2_prev_step", "kv_layer_bytes",
      "kv_total_bytes",
  };
  return columns;
}

bool CanonicalLess(const TraceRow& a, const TraceRow& b) {
  return std::tie(a.model_id, a.prompt_id, a.phase, a.step, a.layer) <
         std::tie(b.model_id, b.prompt_id, b.phase, b.step, b.layer);
}

void SortCanonical(std::vector<TraceRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), CanonicalLess);
}

void ValidateTrace(const std::vector<TraceRow>& rows,
                   const std::vector<std::size_t>* line_of) {
  std::map<GroupKey, std::map<StepKey, StepInfo>> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TraceRow& row = rows[i];
    CheckRow(row, Where(line_of, i));
    auto& step = groups[{row.model_id, row.prompt_id}][{row.phase, row.step}];
    auto [it, inserted] = step.layers.emplace(row.layer, i);
    if (!inserted) {
      Fail(ErrorCode::kData,
           fmt::format("{}: duplicated layer {} in {} step {} of prompt '{}' "
                       "(first at {})",
                       Where(line_of, i), row.layer, PhaseName(row.phase),
                       row.step, row.prompt_id, Where(line_of, it->second)));
    }
    if (row.hidden_l2) step.has_hidden = true;
  }

  for (const auto& [group, steps] : groups) {
    const auto& [model_id, prompt_id] = group;
    std::optional<std::int64_t> num_blocks;
    std::int64_t expected_gen_step = 1;
    for (const auto& [key, info] : steps) {
      const auto& [phase, step] = key;
      const std::string name = fmt::format("model '{}' prompt '{}' {} step {}",
                                           model_id, prompt_id, PhaseName(phase), step);
      if (phase == Phase::kGen) {
        if (step != expected_gen_step) {
          Fail(ErrorCode::kData, fmt::format("{}: expected GEN step {} (steps must "
                                             "be contiguous from 1)",
                                             name, expected_gen_step));
        }
        ++expected_gen_step;
      }
      if (!info.layers.contains(kStepSummaryLayer)) {
        Fail(ErrorCode::kData, fmt::format("{}: missing step-summary row (layer -1)", name));
      }
      // Block layers must be 1..L with the same L on every step.
      std::int64_t max_layer = 0;
      std::int64_t block_count = 0;
      for (const auto& [layer, index] : info.layers) {
        if (layer >= 1) {
          ++block_count;
          max_layer = std::max(max_layer, layer);
        }
      }
      if (block_count != max_layer) {
        Fail(ErrorCode::kData,
             fmt::format("{}: block layers are not contiguous from 1", name));
      }
      if (num_blocks && *num_blocks != max_layer) {
        Fail(ErrorCode::kData, fmt::format("{}: has {} layers, earlier steps have {}",
                                           name, max_layer, *num_blocks));
      }
      num_blocks = max_layer;
      if (info.has_hidden) {
        for (std::int64_t layer = 0; layer <= max_layer; ++layer) {
          const auto it = info.layers.find(layer);
          if (it == info.layers.end() || !rows[it->second].hidden_l2) {
            Fail(ErrorCode::kData,
                 fmt::format("{}: hidden capture needs hidden_l2 on layers 0..{}, "
                             "layer {} lacks it",
                             name, max_layer, layer));
          }
        }
      }
    }
  }
}

std::string FormatTrace(std::vector<TraceRow> rows) {
  SortCanonical(rows);
  ValidateTrace(rows);
  std::string out = JoinHeader(TraceColumns());
  for (const auto& row : rows) out += SerializeRow(row);
  return out;
}

std::size_t WriteTrace(std::vector<TraceRow> rows, std::ostream& out) {
  const std::string text = FormatTrace(std::move(rows));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) Fail(ErrorCode::kIo, "failed writing trace");
  return text.size();
}

std::size_t WriteTraceFile(std::vector<TraceRow> rows,
                           const std::filesystem::path& path) {
  const std::string text = FormatTrace(std::move(rows));
  WriteFileAtomic(path, text);
  return text.size();
}

std::vector<TraceRow> ParseTrace(std::string_view text) {
  const auto records = csv::Parse(text);
  if (records.empty()) Fail(ErrorCode::kData, "missing header line");

  const auto& names = TraceColumns();
  std::vector<int> column_of;  // file column -> Column
  std::set<int> seen;
  for (const auto& name : records.front().fields) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
      Fail(ErrorCode::kData, fmt::format("line 1: unknown column '{}'", name));
    }
    const int column = static_cast<int>(it - names.begin());
    if (!seen.insert(column).second) {
      Fail(ErrorCode::kData, fmt::format("line 1: duplicated column '{}'", name));
    }
    column_of.push_back(column);
  }
  for (int required : {kModelId, kPromptId, kPhase, kStep, kLayer}) {
    if (!seen.contains(required)) {
      Fail(ErrorCode::kData,
           fmt::format("line 1: missing column '{}'", names[static_cast<std::size_t>(required)]));
    }
  }

  std::vector<TraceRow> rows;
  std::vector<std::size_t> line_of;
  rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& record = records[r];
    if (record.fields.size() != column_of.size()) {
      Fail(ErrorCode::kData, fmt::format("line {}: expected {} fields, found {}",
                                         record.line, column_of.size(),
                                         record.fields.size()));
    }
    TraceRow row;
    for (std::size_t f = 0; f < record.fields.size(); ++f) {
      const std::string& text_field = record.fields[f];
      const int column = column_of[f];
      const std::string& name = names[static_cast<std::size_t>(column)];
      auto bad = [&]() {
        Fail(ErrorCode::kData, fmt::format("line {}: malformed value '{}' in column {}",
                                           record.line, text_field, name));
      };
      auto real = [&](std::optional<double>& slot) {
        if (text_field.empty()) return;
        slot = csv::ParseDouble(text_field);
        if (!slot) bad();
      };
      auto integer = [&](std::optional<std::int64_t>& slot) {
        if (text_field.empty()) return;
        slot = csv::ParseInt(text_field);
        if (!slot) bad();
      };
      auto required_int = [&](std::int64_t& slot) {
        const auto v = csv::ParseInt(text_field);
        if (!v) bad();
        slot = *v;
      };
      switch (column) {
        case kModelId: row.model_id = text_field; break;
        case kPromptId: row.prompt_id = text_field; break;
        case kPhase:
          if (text_field == "PROMPT") {
            row.phase = Phase::kPrompt;
          } else if (text_field == "GEN") {
            row.phase = Phase::kGen;
          } else {
            bad();
          }
          break;
        case kStep: required_int(row.step); break;
        case kLayer: required_int(row.layer); break;
        case kTokenId: integer(row.token_id); break;
        case kOutputEntropy: real(row.output_entropy); break;
        case kTop1Prob: real(row.top1_prob); break;
        case kTop1Top2Gap: real(row.top1_top2_gap); break;
        case kAttnEntropyMean: real(row.attn_entropy_mean); break;
        case kHdi: real(row.hdi); break;
        case kHiddenL2: real(row.hidden_l2); break;
        case kDeltaL2PrevLayer: real(row.delta_l2_prev_layer); break;
        case kDeltaL2PrevStep: real(row.delta_l2_prev_step); break;
        case kKvLayerBytes: integer(row.kv_layer_bytes); break;
        case kKvTotalBytes: integer(row.kv_total_bytes); break;
        default: bad();
      }
    }
    rows.push_back(std::move(row));
    line_of.push_back(record.line);
  }
  ValidateTrace(rows, &line_of);
  return rows;
}

std::vector<TraceRow> ReadTrace(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseTrace(buf.str());
}

std::vector<TraceRow> ReadTraceFile(const std::filesystem::path& path) {
  try {
    return ParseTrace(ReadFile(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kData) {
      Fail(ErrorCode::kData, path.string() + ": " + e.what());
    }
    throw;
  }
}

// ---------------------------------------------------------------------------
// Run summary

const std::vector<std::string>& SummaryColumns() {
  static const std::vector<std::string> columns = {
      "model_id",   "prompt_id",  "prompt_tokens",     "output_tokens",
      "gen_tokens", "stop_reason", "trace_file",       "log_base",
      "max_steps",  "capture_attention", "capture_hidden",
  };
  return columns;
}

std::string FormatSummary(const std::vector<RunSummary>& records) {
  std::set<GroupKey> seen;
  std::string out = JoinHeader(SummaryColumns());
  for (const auto& r : records) {
    if (!seen.insert({r.model_id, r.prompt_id}).second) {
      Fail(ErrorCode::kData, fmt::format("duplicate summary record for model '{}' "
                                         "prompt '{}'",
                                         r.model_id, r.prompt_id));
    }
    csv::AppendField(out, r.model_id);
    out += ',';
    csv::AppendField(out, r.prompt_id);
    out += ',';
    csv::AppendField(out, r.prompt_tokens);
    out += ',';
    csv::AppendField(out, r.output_tokens);
    out += ',';
    out += std::to_string(r.gen_tokens);
    out += ',';
    csv::AppendField(out, r.stop_reason);
    out += ',';
    csv::AppendField(out, r.trace_file);
    out += ',';
    csv::AppendField(out, r.log_base);
    out += ',';
    out += std::to_string(r.max_steps);
    out += ',';
    out += r.capture_attention ? "true" : "false";
    out += ',';
    out += r.capture_hidden ? "true" : "false";
    out += '\n';
  }
  return out;
}

std::size_t WriteSummary(const std::vector<RunSummary>& records,
                         std::ostream& out) {
  const std::string text = FormatSummary(records);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) Fail(ErrorCode::kIo, "failed writing summary");
  return text.size();
}

std::size_t WriteSummaryFile(const std::vector<RunSummary>& records,
                             const std::filesystem::path& path) {
  const std::string text = FormatSummary(records);
  WriteFileAtomic(path, text);
  return text.size();
}

std::vector<RunSummary> ReadSummary(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto records = csv::Parse(buf.str());
  if (records.empty()) Fail(ErrorCode::kData, "missing header line");
  if (records.front().fields != SummaryColumns()) {
    Fail(ErrorCode::kData, "line 1: summary header does not match the expected columns");
  }
  std::vector<RunSummary> out;
  std::set<GroupKey> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& f = records[r].fields;
    const std::size_t line = records[r].line;
    if (f.size() != SummaryColumns().size()) {
      Fail(ErrorCode::kData, fmt::format("line {}: expected {} fields, found {}", line,
                                         SummaryColumns().size(), f.size()));
    }
    RunSummary s;
    s.model_id = f[0];
    s.prompt_id = f[1];
    s.prompt_tokens = f[2];
    s.output_tokens = f[3];
    const auto gen = csv::ParseInt(f[4]);
    const auto max_steps = csv::ParseInt(f[8]);
    if (!gen || *gen < 0 || !max_steps ||
        !ParseBool(f[9], s.capture_attention) || !ParseBool(f[10], s.capture_hidden)) {
      Fail(ErrorCode::kData, fmt::format("line {}: malformed summary record", line));
    }
    s.gen_tokens = *gen;
    s.stop_reason = f[5];
    s.trace_file = f[6];
    s.log_base = f[7];
    s.max_steps = *max_steps;
    if (!seen.insert({s.model_id, s.prompt_id}).second) {
      Fail(ErrorCode::kData, fmt::format("line {}: duplicate record for model '{}' "
                                         "prompt '{}'",
                                         line, s.model_id, s.prompt_id));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<RunSummary> ReadSummaryFile(const std::filesystem::path& path) {
  std::istringstream in(ReadFile(path));
  return ReadSummary(in);
}

}  // namespace tracescope::trace
