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

#pragma once

// Long-format trace records and their CSV encoding.
//
// A trace is indexed by (model_id, prompt_id, phase, step, layer). Each step
// carries one layer = -1 step-summary row with the output-distribution
// scalars and the total KV footprint, followed by one row per hidden layer
// (0 = embedding output, 1..L = transformer blocks).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tracescope::trace {

enum class Phase { kPrompt, kGen };

std::string_view PhaseName(Phase phase);

inline constexpr std::int64_t kStepSummaryLayer = -1;

struct TraceRow {
  std::string model_id;
  std::string prompt_id;
  Phase phase = Phase::kPrompt;
  std::int64_t step = 0;
  std::int64_t layer = kStepSummaryLayer;

  std::optional<std::int64_t> token_id;         // layer -1, GEN only
  std::optional<double> output_entropy;         // layer -1
  std::optional<double> top1_prob;              // layer -1
  std::optional<double> top1_top2_gap;          // layer -1
  std::optional<double> attn_entropy_mean;      // layer >= 1
  std::optional<double> hdi;                    // layer >= 1
  std::optional<double> hidden_l2;              // layer >= 0
  std::optional<double> delta_l2_prev_layer;    // layer >= 1
  std::optional<double> delta_l2_prev_step;     // layer >= 0, GEN step >= 2
  std::optional<std::int64_t> kv_layer_bytes;   // layer >= 1
  std::optional<std::int64_t> kv_total_bytes;   // layer -1

  bool operator==(const TraceRow&) const = default;
};

// Column names, in file order.
const std::vector<std::string>& TraceColumns();

// Orders rows by (model_id, prompt_id, phase, step, layer); PROMPT sorts
// before GEN.
bool CanonicalLess(const TraceRow& a, const TraceRow& b);
void SortCanonical(std::vector<TraceRow>& rows);

// Throws Error(kData) naming the offending step/layer. `line_of` maps a row
// index to a source line for diagnostics; pass nullptr when rows did not
// come from a file.
void ValidateTrace(const std::vector<TraceRow>& rows,
                   const std::vector<std::size_t>* line_of = nullptr);

// Canonical-sorts a copy, validates it, writes header + rows. Returns the
// number of bytes written.
std::size_t WriteTrace(std::vector<TraceRow> rows, std::ostream& out);
std::string FormatTrace(std::vector<TraceRow> rows);
std::size_t WriteTraceFile(std::vector<TraceRow> rows,
                           const std::filesystem::path& path);

std::vector<TraceRow> ReadTrace(std::istream& in);
std::vector<TraceRow> ParseTrace(std::string_view text);
std::vector<TraceRow> ReadTraceFile(const std::filesystem::path& path);

// One record per (model, prompt) decode.
struct RunSummary {
  std::string model_id;
  std::string prompt_id;
  std::string prompt_tokens;   // space-separated token ids
  std::string output_tokens;   // space-separated generated ids
  std::int64_t gen_tokens = 0;
  std::string stop_reason;
  std::string trace_file;
  std::string log_base = "e";
  std::int64_t max_steps = 0;
  bool capture_attention = true;
  bool capture_hidden = true;

  bool operator==(const RunSummary&) const = default;
};

const std::vector<std::string>& SummaryColumns();

std::size_t WriteSummary(const std::vector<RunSummary>& records,
                         std::ostream& out);
std::string FormatSummary(const std::vector<RunSummary>& records);
std::size_t WriteSummaryFile(const std::vector<RunSummary>& records,
                             const std::filesystem::path& path);
std::vector<RunSummary> ReadSummary(std::istream& in);
std::vector<RunSummary> ReadSummaryFile(const std::filesystem::path& path);

}  // namespace tracescope::trace
