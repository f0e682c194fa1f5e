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

#include "tracescope/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/core.h>

#include "tracescope/error.hpp"

namespace tracescope::analysis {
namespace {

using trace::Phase;
using trace::TraceRow;

double Mean(std::span<const double> values) {
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double PopulationSd(std::span<const double> values, double mean) {
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

template <typename Field>
void CollectLayerField(const ModelTrace& trace, const ModelTrace::Step& step,
                       Field field, std::vector<double>& out) {
  for (std::size_t index : step.layers) {
    const auto& value = trace.row(index).*field;
    if (value) out.push_back(*value);
  }
}

// Prompt length from KV growth: the first GEN step adds exactly one position.
std::optional<double> PromptLength(const ModelTrace& trace,
                                   const ModelTrace::PromptSequence& seq) {
  if (!seq.prompt || seq.gen.empty()) return std::nullopt;
  const auto& prompt_kv = trace.row(seq.prompt->summary).kv_total_bytes;
  const auto& first_kv = trace.row(seq.gen.front().summary).kv_total_bytes;
  if (!prompt_kv || !first_kv || *first_kv <= *prompt_kv) return std::nullopt;
  const std::int64_t per_position = *first_kv - *prompt_kv;
  if (*prompt_kv % per_position != 0) return std::nullopt;
  return static_cast<double>(*prompt_kv / per_position);
}

std::optional<double> MetricOfStep(const ModelTrace& trace,
                                   const ModelTrace::Step& step,
                                   std::string_view metric) {
  const TraceRow& summary = trace.row(step.summary);
  if (metric == "output_entropy") return summary.output_entropy;
  if (metric == "top1_prob") return summary.top1_prob;
  if (metric == "top1_top2_gap") return summary.top1_top2_gap;
  if (metric == "kv_total_bytes") {
    if (!summary.kv_total_bytes) return std::nullopt;
    return static_cast<double>(*summary.kv_total_bytes);
  }
  std::vector<double> values;
  if (metric == "attn_entropy_mean") {
    CollectLayerField(trace, step, &TraceRow::attn_entropy_mean, values);
  } else if (metric == "hdi") {
    CollectLayerField(trace, step, &TraceRow::hdi, values);
  } else if (metric == "hidden_l2") {
    CollectLayerField(trace, step, &TraceRow::hidden_l2, values);
  } else if (metric == "delta_l2_prev_layer") {
    CollectLayerField(trace, step, &TraceRow::delta_l2_prev_layer, values);
  } else if (metric == "delta_l2_prev_step") {
    CollectLayerField(trace, step, &TraceRow::delta_l2_prev_step, values);
  } else if (metric == "kv_layer_bytes") {
    for (std::size_t index : step.layers) {
      const auto& v = trace.row(index).kv_layer_bytes;
      if (v) values.push_back(static_cast<double>(*v));
    }
  } else {
    Fail(ErrorCode::kInvalidArgument, fmt::format("unknown metric '{}'", metric));
  }
  if (values.empty()) return std::nullopt;
  return Mean(values);
}

std::vector<LayerStat> PerLayerStats(const ModelTrace& trace) {
  if (!trace.has_attention()) {
    Fail(ErrorCode::kData, fmt::format("model '{}': attention fields absent",
                                       trace.model_id()));
  }
  const int layers = trace.num_layers();
  std::vector<std::vector<double>> entropy(static_cast<std::size_t>(layers) + 1);
  std::vector<std::vector<double>> hdi(static_cast<std::size_t>(layers) + 1);
  for (const auto& seq : trace.prompts()) {
    for (const auto& step : seq.gen) {
      for (std::size_t index : step.layers) {
        const TraceRow& row = trace.row(index);
        if (row.layer < 1) continue;
        const auto l = static_cast<std::size_t>(row.layer);
        if (row.attn_entropy_mean) entropy[l].push_back(*row.attn_entropy_mean);
        if (row.hdi) hdi[l].push_back(*row.hdi);
      }
    }
  }
  std::vector<LayerStat> stats;
  for (int l = 1; l <= layers; ++l) {
    const auto& e = entropy[static_cast<std::size_t>(l)];
    const auto& h = hdi[static_cast<std::size_t>(l)];
    if (e.empty() || h.empty()) {
      Fail(ErrorCode::kData,
           fmt::format("model '{}': attention fields absent on GEN rows of layer {}",
                       trace.model_id(), l));
    }
    stats.push_back({l, Mean(e), Mean(h)});
  }
  return stats;
}

bool LowerEntropy(const LayerStat& a, const LayerStat& b) {
  if (a.entropy != b.entropy) return a.entropy < b.entropy;
  return a.layer < b.layer;
}

bool HigherEntropy(const LayerStat& a, const LayerStat& b) {
  if (a.entropy != b.entropy) return a.entropy > b.entropy;
  return a.layer < b.layer;
}

}  // namespace

DistributionProfile ComputeDistributionProfile(std::span<const double> values) {
  if (values.empty()) {
    Fail(ErrorCode::kInsufficientData, "distribution profile of no values");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      Fail(ErrorCode::kInvalidArgument, "distribution profile of non-finite value");
    }
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  DistributionProfile p;
  p.n = sorted.size();
  // Summing the sorted copy keeps the result independent of input order.
  p.mean = Mean(sorted);
  p.sd = PopulationSd(sorted, p.mean);
  p.median = PercentileLinear(sorted, 0.5);
  p.p10 = PercentileLinear(sorted, 0.1);
  p.p90 = PercentileLinear(sorted, 0.9);
  p.min = sorted.front();
  p.max = sorted.back();
  return p;
}

double PercentileLinear(std::span<const double> sorted, double q) {
  if (sorted.empty()) Fail(ErrorCode::kInsufficientData, "percentile of no values");
  if (!(q >= 0.0 && q <= 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "percentile rank must lie in [0, 1]");
  }
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// ---------------------------------------------------------------------------

ModelTrace::ModelTrace(std::vector<TraceRow> rows) : rows_(std::move(rows)) {
  trace::SortCanonical(rows_);
  trace::ValidateTrace(rows_);
  if (rows_.empty()) Fail(ErrorCode::kData, "trace has no rows");
  model_id_ = rows_.front().model_id;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const TraceRow& row = rows_[i];
    if (row.model_id != model_id_) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("mixed model ids '{}' and '{}' in one model trace",
                       model_id_, row.model_id));
    }
    if (prompts_.empty() || prompts_.back().prompt_id != row.prompt_id) {
      prompts_.push_back({row.prompt_id, std::nullopt, {}});
    }
    auto& seq = prompts_.back();
    if (row.layer == trace::kStepSummaryLayer) {
      Step step{row.phase, row.step, i, {}};
      if (row.phase == Phase::kPrompt) {
        seq.prompt = std::move(step);
      } else {
        seq.gen.push_back(std::move(step));
      }
    } else {
      // Canonical order puts the layer -1 row first within each step.
      Step& step = row.phase == Phase::kPrompt ? *seq.prompt : seq.gen.back();
      step.layers.push_back(i);
    }
    num_layers_ = std::max(num_layers_, static_cast<int>(row.layer));
    has_attention_ = has_attention_ || row.attn_entropy_mean.has_value();
    has_hidden_ = has_hidden_ || row.hidden_l2.has_value();
  }
}

std::vector<ModelTrace> ModelTrace::Group(std::vector<TraceRow> rows) {
  std::map<std::string, std::vector<TraceRow>> by_model;
  for (auto& row : rows) by_model[row.model_id].push_back(std::move(row));
  std::vector<ModelTrace> out;
  for (auto& [id, model_rows] : by_model) out.emplace_back(std::move(model_rows));
  return out;
}

std::size_t ModelTrace::gen_steps() const {
  std::size_t n = 0;
  for (const auto& seq : prompts_) n += seq.gen.size();
  return n;
}

SummaryProfile SummarizeGenPhase(const ModelTrace& trace) {
  if (trace.gen_steps() == 0) {
    Fail(ErrorCode::kInsufficientData,
         fmt::format("model '{}': no GEN steps", trace.model_id()));
  }
  SummaryProfile s;
  s.num_prompts = trace.prompts().size();
  std::vector<double> entropy, top1, gap, attn, hdi, prompt_lengths;
  bool prompt_lengths_complete = true;
  for (const auto& seq : trace.prompts()) {
    if (const auto len = PromptLength(trace, seq)) {
      prompt_lengths.push_back(*len);
    } else {
      prompt_lengths_complete = false;
    }
    for (const auto& step : seq.gen) {
      const TraceRow& summary = trace.row(step.summary);
      entropy.push_back(*summary.output_entropy);
      top1.push_back(*summary.top1_prob);
      gap.push_back(*summary.top1_top2_gap);
      if (summary.kv_total_bytes) {
        s.kv_total_max_bytes =
            std::max(s.kv_total_max_bytes.value_or(0), *summary.kv_total_bytes);
      }
      CollectLayerField(trace, step, &TraceRow::attn_entropy_mean, attn);
      CollectLayerField(trace, step, &TraceRow::hdi, hdi);
    }
  }
  s.gen_tokens = entropy.size();
  s.gen_tokens_mean =
      static_cast<double>(s.gen_tokens) / static_cast<double>(s.num_prompts);
  if (prompt_lengths_complete && !prompt_lengths.empty()) {
    s.prompt_tokens = Mean(prompt_lengths);
  }
  s.output_entropy = ComputeDistributionProfile(entropy);
  s.top1_prob = ComputeDistributionProfile(top1);
  s.top1_top2_gap_mean = Mean(gap);
  if (!attn.empty()) s.attn_entropy = ComputeDistributionProfile(attn);
  if (!hdi.empty()) s.hdi = ComputeDistributionProfile(hdi);
  return s;
}

LayerProfile ComputeLayerProfile(const ModelTrace& trace) {
  LayerProfile p;
  p.per_layer = PerLayerStats(trace);
  p.num_layers = static_cast<int>(p.per_layer.size());
  std::vector<double> means, hdis;
  for (const auto& stat : p.per_layer) {
    means.push_back(stat.entropy);
    hdis.push_back(stat.hdi);
  }
  p.mean_layer_entropy = Mean(means);
  p.sd_across_layers = PopulationSd(means, p.mean_layer_entropy);
  p.mean_hdi = Mean(hdis);
  p.lowest = *std::min_element(p.per_layer.begin(), p.per_layer.end(), LowerEntropy);
  p.highest = *std::min_element(p.per_layer.begin(), p.per_layer.end(), HigherEntropy);
  return p;
}

ExtremalLayers FindExtremalLayers(const ModelTrace& trace, int k) {
  auto stats = PerLayerStats(trace);
  if (k < 1 || k > static_cast<int>(stats.size())) {
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("k = {} outside [1, {}]", k, stats.size()));
  }
  ExtremalLayers out;
  std::sort(stats.begin(), stats.end(), LowerEntropy);
  out.lowest.assign(stats.begin(), stats.begin() + k);
  std::sort(stats.begin(), stats.end(), HigherEntropy);
  out.highest.assign(stats.begin(), stats.begin() + k);
  return out;
}

DriftReport EarlyLateDrift(const ModelTrace& trace, double fraction) {
  if (!(fraction > 0.0 && fraction <= 0.5)) {
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("drift window fraction {} outside (0, 0.5]", fraction));
  }
  DriftReport report;
  report.window_fraction = fraction;
  std::vector<double> early_out, late_out, early_attn, late_attn;
  for (const auto& seq : trace.prompts()) {
    const std::size_t n = seq.gen.size();
    if (n < 2) continue;
    // The epsilon keeps e.g. 0.2 * 15 from flooring to 2.
    const auto w = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9)));
    report.window_steps += w;
    for (std::size_t i = 0; i < w; ++i) {
      const auto& early = seq.gen[i];
      const auto& late = seq.gen[n - w + i];
      early_out.push_back(*trace.row(early.summary).output_entropy);
      late_out.push_back(*trace.row(late.summary).output_entropy);
      CollectLayerField(trace, early, &TraceRow::attn_entropy_mean, early_attn);
      CollectLayerField(trace, late, &TraceRow::attn_entropy_mean, late_attn);
    }
  }
  if (early_out.empty()) {
    Fail(ErrorCode::kInsufficientData,
         fmt::format("model '{}': drift needs a prompt with >= 2 GEN steps",
                     trace.model_id()));
  }
  auto drift = [](std::span<const double> early, std::span<const double> late) {
    SignalDrift d;
    d.early_mean = Mean(early);
    d.late_mean = Mean(late);
    d.delta = d.late_mean - d.early_mean;
    return d;
  };
  report.output_entropy = drift(early_out, late_out);
  if (!early_attn.empty() && !late_attn.empty()) {
    report.attn_entropy = drift(early_attn, late_attn);
  }
  return report;
}

HiddenStats ComputeHiddenStats(const ModelTrace& trace) {
  std::vector<double> l2, prev_step, prev_layer;
  for (const auto& seq : trace.prompts()) {
    for (const auto& step : seq.gen) {
      CollectLayerField(trace, step, &TraceRow::hidden_l2, l2);
      CollectLayerField(trace, step, &TraceRow::delta_l2_prev_step, prev_step);
      CollectLayerField(trace, step, &TraceRow::delta_l2_prev_layer, prev_layer);
    }
  }
  if (l2.empty()) {
    Fail(ErrorCode::kData, fmt::format("model '{}': hidden-state fields absent",
                                       trace.model_id()));
  }
  HiddenStats stats;
  stats.hidden_l2 = ComputeDistributionProfile(l2);
  if (!prev_step.empty()) stats.delta_prev_step = ComputeDistributionProfile(prev_step);
  if (!prev_layer.empty()) stats.delta_prev_layer = ComputeDistributionProfile(prev_layer);
  return stats;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& CorrelationMetrics() {
  static const std::vector<std::string> metrics = {
      "output_entropy", "top1_prob", "top1_top2_gap", "attn_entropy_mean",
      "hdi", "hidden_l2", "delta_l2_prev_layer", "delta_l2_prev_step",
      "kv_layer_bytes", "kv_total_bytes",
  };
  return metrics;
}

std::optional<double> PearsonCorrelation(std::span<const double> x,
                                         std::span<const double> y) {
  if (x.size() != y.size()) {
    Fail(ErrorCode::kInvalidArgument, "correlation inputs differ in length");
  }
  if (x.size() < 3) {
    Fail(ErrorCode::kInsufficientData,
         fmt::format("correlation needs >= 3 observations, got {}", x.size()));
  }
  const double mx = Mean(x);
  const double my = Mean(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<std::vector<std::optional<double>>> JointRecords(
    std::span<const ModelTrace> traces, std::span<const std::string> metrics,
    CorrelationGranularity granularity) {
  for (const auto& m : metrics) {
    const auto& known = CorrelationMetrics();
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      Fail(ErrorCode::kInvalidArgument, fmt::format("unknown metric '{}'", m));
    }
  }
  std::vector<std::vector<std::optional<double>>> records;
  for (const auto& trace : traces) {
    std::vector<std::vector<std::optional<double>>> steps;
    for (const auto& seq : trace.prompts()) {
      for (const auto& step : seq.gen) {
        std::vector<std::optional<double>> record;
        for (const auto& m : metrics) record.push_back(MetricOfStep(trace, step, m));
        steps.push_back(std::move(record));
      }
    }
    if (granularity == CorrelationGranularity::kPerStep) {
      for (auto& r : steps) records.push_back(std::move(r));
      continue;
    }
    std::vector<std::optional<double>> model_record;
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      std::vector<double> values;
      for (const auto& r : steps) {
        if (r[m]) values.push_back(*r[m]);
      }
      model_record.push_back(values.empty() ? std::nullopt
                                            : std::optional<double>(Mean(values)));
    }
    records.push_back(std::move(model_record));
  }
  return records;
}

CorrelationMatrix ComputeCorrelationMatrix(std::span<const ModelTrace> traces,
                                           std::span<const std::string> metrics,
                                           CorrelationGranularity granularity) {
  const auto records = JointRecords(traces, metrics, granularity);
  const std::size_t k = metrics.size();
  CorrelationMatrix out;
  out.metrics.assign(metrics.begin(), metrics.end());
  out.r.assign(k, std::vector<std::optional<double>>(k));
  out.n.assign(k, std::vector<std::size_t>(k, 0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      std::vector<double> x, y;
      for (const auto& r : records) {
        if (r[i] && r[j]) {
          x.push_back(*r[i]);
          y.push_back(*r[j]);
        }
      }
      if (x.size() < 3) {
        Fail(ErrorCode::kInsufficientData,
             fmt::format("correlation of {} and {}: {} joint observations, need 3",
                         metrics[i], metrics[j], x.size()));
      }
      std::optional<double> r = PearsonCorrelation(x, y);
      if (i == j && r) r = 1.0;
      out.r[i][j] = out.r[j][i] = r;
      out.n[i][j] = out.n[j][i] = x.size();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view RegimeName(Regime regime) {
  switch (regime) {
    case Regime::kDeterministic: return "deterministic";
    case Regime::kExploratory: return "exploratory";
    case Regime::kBalanced: return "balanced";
  }
  return "unknown";
}

RegimeLabel ClassifyRegime(const DriftReport& drift,
                           const SummaryProfile& summary, double tau) {
  RegimeLabel label;
  label.delta_output_entropy = drift.output_entropy.delta;
  label.mean_output_entropy = summary.output_entropy.mean;
  label.sd_output_entropy = summary.output_entropy.sd;
  label.tau = tau;
  if (label.delta_output_entropy <= -tau) {
    label.label = Regime::kDeterministic;
  } else if (label.delta_output_entropy >= tau) {
    label.label = Regime::kExploratory;
  } else {
    label.label = Regime::kBalanced;
  }
  return label;
}

Agreement InterRaterAgreement(std::span<const std::string> labels_a,
                              std::span<const std::string> labels_b) {
  if (labels_a.size() != labels_b.size()) {
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("label lists differ in length: {} vs {}", labels_a.size(),
                     labels_b.size()));
  }
  if (labels_a.empty()) Fail(ErrorCode::kInvalidArgument, "empty label lists");
  Agreement out;
  out.n = labels_a.size();
  const double n = static_cast<double>(out.n);
  std::map<std::string, std::pair<std::size_t, std::size_t>> marginals;
  std::size_t matches = 0;
  for (std::size_t i = 0; i < out.n; ++i) {
    if (labels_a[i] == labels_b[i]) ++matches;
    ++marginals[labels_a[i]].first;
    ++marginals[labels_b[i]].second;
  }
  out.percent_agreement = static_cast<double>(matches) / n;
  for (const auto& [label, counts] : marginals) {
    out.expected_agreement += (static_cast<double>(counts.first) / n) *
                              (static_cast<double>(counts.second) / n);
  }
  if (out.expected_agreement < 1.0) {
    out.cohen_kappa = (out.percent_agreement - out.expected_agreement) /
                      (1.0 - out.expected_agreement);
  }
  return out;
}

}  // namespace tracescope::analysis
