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

// Builders for hand-made traces with known statistics.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tracescope/trace.hpp"

namespace tracescope::testing {

struct SyntheticSpec {
  std::string model_id = "m";
  std::string prompt_id = "p0";
  std::vector<double> gen_entropy;     // one per GEN step
  int num_layers = 2;
  // attn[step][layer-1]; empty means no attention capture.
  std::vector<std::vector<double>> attn;
  bool hidden = false;
  bool prompt_row = true;
  std::int64_t kv_per_position = 64;
  std::int64_t prompt_len = 4;
};

inline std::vector<trace::TraceRow> MakeTrace(const SyntheticSpec& shape) {
  using trace::Phase;
  using trace::TraceRow;
  std::vector<TraceRow> rows;
  auto base = [&](Phase phase, std::int64_t step, std::int64_t layer) {
    TraceRow r;
    r.model_id = shape.model_id;
    r.prompt_id = shape.prompt_id;
    r.phase = phase;
    r.step = step;
    r.layer = layer;
    return r;
  };
  auto add_layers = [&](Phase phase, std::int64_t step, std::int64_t seq) {
    if (shape.hidden) {
      TraceRow r = base(phase, step, 0);
      r.hidden_l2 = 1.0 + 0.01 * static_cast<double>(step);
      rows.push_back(r);
    }
    for (int l = 1; l <= shape.num_layers; ++l) {
      TraceRow r = base(phase, step, l);
      r.kv_layer_bytes = shape.kv_per_position * seq / shape.num_layers;
      if (!shape.attn.empty() && phase == Phase::kGen) {
        r.attn_entropy_mean = shape.attn[static_cast<std::size_t>(step - 1)][l - 1];
        r.hdi = 0.01 * l;
      }
      if (shape.hidden) {
        r.hidden_l2 = 1.0 + l + 0.01 * static_cast<double>(step);
        r.delta_l2_prev_layer = 1.0;
        if (phase == Phase::kGen && step >= 2) r.delta_l2_prev_step = 0.1 * l;
      }
      rows.push_back(r);
    }
  };
  if (shape.prompt_row) {
    TraceRow s = base(Phase::kPrompt, 0, trace::kStepSummaryLayer);
    s.output_entropy = 0.5;
    s.top1_prob = 0.8;
    s.top1_top2_gap = 0.7;
    s.kv_total_bytes = shape.kv_per_position * shape.prompt_len;
    rows.push_back(s);
    add_layers(Phase::kPrompt, 0, shape.prompt_len);
  }
  for (std::size_t i = 0; i < shape.gen_entropy.size(); ++i) {
    const auto step = static_cast<std::int64_t>(i + 1);
    TraceRow s = base(Phase::kGen, step, trace::kStepSummaryLayer);
    s.token_id = static_cast<std::int64_t>(i % 7);
    s.output_entropy = shape.gen_entropy[i];
    s.top1_prob = 1.0 / (1.0 + shape.gen_entropy[i]);
    s.top1_top2_gap = 0.5 / (1.0 + shape.gen_entropy[i]);
    s.kv_total_bytes = shape.kv_per_position * (shape.prompt_len + step);
    rows.push_back(s);
    add_layers(Phase::kGen, step, shape.prompt_len + step);
  }
  return rows;
}

// First half at `start`, second half at `start + delta`, so any drift
// window up to half the steps sees exactly `delta`.
inline std::vector<double> StepEntropies(std::size_t n, double start, double delta) {
  std::vector<double> v(n, start);
  for (std::size_t i = n / 2; i < n; ++i) v[i] = start + delta;
  return v;
}

}  // namespace tracescope::testing
