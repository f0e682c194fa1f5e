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

// Trace-level analyses: GEN-phase summaries, distribution and layer
// profiles, early/late drift, extremal layers, hidden-state statistics,
// correlation, regime classification and rater agreement.
//
// Conventions: population standard deviation everywhere; percentiles by
// linear interpolation between closest ranks (h = (n - 1) q); ties between
// layers go to the lower layer index.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tracescope/trace.hpp"

namespace tracescope::analysis {

struct DistributionProfile {
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

DistributionProfile ComputeDistributionProfile(std::span<const double> values);

// `sorted` ascending and non-empty; q in [0, 1].
double PercentileLinear(std::span<const double> sorted, double q);

// Index over the rows of a single model. Rows are validated and kept in
// canonical order.
class ModelTrace {
 public:
  struct Step {
    trace::Phase phase = trace::Phase::kGen;
    std::int64_t step = 0;
    std::size_t summary = 0;           // row index of the layer -1 row
    std::vector<std::size_t> layers;   // row indices of layer >= 0, ascending
  };
  struct PromptSequence {
    std::string prompt_id;
    std::optional<Step> prompt;
    std::vector<Step> gen;  // ordered by step
  };

  // All rows must share one model_id.
  explicit ModelTrace(std::vector<trace::TraceRow> rows);

  // Splits rows by model_id, ordered by model_id.
  static std::vector<ModelTrace> Group(std::vector<trace::TraceRow> rows);

  const std::string& model_id() const { return model_id_; }
  const std::vector<trace::TraceRow>& rows() const { return rows_; }
  const trace::TraceRow& row(std::size_t index) const { return rows_[index]; }
  const std::vector<PromptSequence>& prompts() const { return prompts_; }

  int num_layers() const { return num_layers_; }
  std::size_t gen_steps() const;
  bool has_attention() const { return has_attention_; }
  bool has_hidden() const { return has_hidden_; }

 private:
  std::string model_id_;
  std::vector<trace::TraceRow> rows_;
  std::vector<PromptSequence> prompts_;
  int num_layers_ = 0;
  bool has_attention_ = false;
  bool has_hidden_ = false;
};

struct SummaryProfile {
  std::size_t num_prompts = 0;
  // Mean prompt length, recovered from KV growth between the prompt pass and
  // the first GEN step; absent when the trace lacks KV totals.
  std::optional<double> prompt_tokens;
  std::size_t gen_tokens = 0;   // total GEN steps
  double gen_tokens_mean = 0.0; // per prompt
  DistributionProfile output_entropy;
  DistributionProfile top1_prob;
  std::optional<DistributionProfile> attn_entropy;  // pooled (step, layer)
  std::optional<DistributionProfile> hdi;           // pooled (step, layer)
  double top1_top2_gap_mean = 0.0;
  std::optional<std::int64_t> kv_total_max_bytes;
};

// Throws kInsufficientData when there are no GEN steps.
SummaryProfile SummarizeGenPhase(const ModelTrace& trace);

struct LayerStat {
  int layer = 0;
  double entropy = 0.0;  // mean attention entropy over GEN steps
  double hdi = 0.0;      // mean HDI over GEN steps
};

struct LayerProfile {
  int num_layers = 0;
  double mean_layer_entropy = 0.0;
  double sd_across_layers = 0.0;
  LayerStat lowest;
  LayerStat highest;
  double mean_hdi = 0.0;
  std::vector<LayerStat> per_layer;  // layers 1..L
};

// Throws kData when attention fields are absent.
LayerProfile ComputeLayerProfile(const ModelTrace& trace);

struct ExtremalLayers {
  std::vector<LayerStat> lowest;   // ascending entropy
  std::vector<LayerStat> highest;  // descending entropy
};

// Throws kInvalidArgument when k is outside [1, L].
ExtremalLayers FindExtremalLayers(const ModelTrace& trace, int k);

struct SignalDrift {
  double early_mean = 0.0;
  double late_mean = 0.0;
  double delta = 0.0;  // late_mean - early_mean
};

struct DriftReport {
  double window_fraction = 0.2;
  std::size_t window_steps = 0;  // summed over prompts
  SignalDrift output_entropy;
  std::optional<SignalDrift> attn_entropy;
};

// Window w = max(1, floor(fraction * N)) per prompt sequence; prompts with
// fewer than 2 GEN steps are skipped. Throws kInsufficientData when no
// prompt qualifies and kInvalidArgument for fraction outside (0, 0.5].
DriftReport EarlyLateDrift(const ModelTrace& trace, double fraction = 0.2);

struct HiddenStats {
  DistributionProfile hidden_l2;
  std::optional<DistributionProfile> delta_prev_step;
  std::optional<DistributionProfile> delta_prev_layer;
};

// Pooled over GEN rows of every layer. Throws kData without hidden fields.
HiddenStats ComputeHiddenStats(const ModelTrace& trace);

enum class CorrelationGranularity { kPerStep, kPerModel };

// Metrics available to the correlation matrix. Layer metrics enter as
// their step-level mean.
const std::vector<std::string>& CorrelationMetrics();

struct CorrelationMatrix {
  std::vector<std::string> metrics;
  // r[i][j]; nullopt when either side has zero variance.
  std::vector<std::vector<std::optional<double>>> r;
  std::vector<std::vector<std::size_t>> n;  // joint observations
};

// Pearson r over pairwise-complete observations; nullopt for zero variance.
// Throws kInsufficientData with fewer than 3 pairs.
std::optional<double> PearsonCorrelation(std::span<const double> x,
                                         std::span<const double> y);

CorrelationMatrix ComputeCorrelationMatrix(
    std::span<const ModelTrace> traces, std::span<const std::string> metrics,
    CorrelationGranularity granularity = CorrelationGranularity::kPerStep);

// Joint per-step (or per-model) records, one column per metric name.
std::vector<std::vector<std::optional<double>>> JointRecords(
    std::span<const ModelTrace> traces, std::span<const std::string> metrics,
    CorrelationGranularity granularity);

enum class Regime { kDeterministic, kExploratory, kBalanced };

std::string_view RegimeName(Regime regime);

struct RegimeLabel {
  Regime label = Regime::kBalanced;
  double delta_output_entropy = 0.0;
  double mean_output_entropy = 0.0;
  double sd_output_entropy = 0.0;
  double tau = 0.1;
};

// delta <= -tau: deterministic; delta >= +tau: exploratory; else balanced.
RegimeLabel ClassifyRegime(const DriftReport& drift,
                           const SummaryProfile& summary, double tau = 0.1);

struct Agreement {
  std::size_t n = 0;
  double percent_agreement = 0.0;   // observed agreement p_o, in [0, 1]
  double expected_agreement = 0.0;  // chance agreement p_e
  std::optional<double> cohen_kappa;  // nullopt when p_e == 1
};

Agreement InterRaterAgreement(std::span<const std::string> labels_a,
                              std::span<const std::string> labels_b);

}  // namespace tracescope::analysis
