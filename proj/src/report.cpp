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

#include "tracescope/report.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include <fmt/core.h>

#include "csv.hpp"
#include "tracescope/error.hpp"

namespace tracescope::report {
namespace {

using analysis::DistributionProfile;

constexpr std::string_view kNotAvailable = "n/a";

const std::vector<std::pair<std::string_view, Section>>& SectionTable() {
  static const std::vector<std::pair<std::string_view, Section>> table = {
      {"summary", kSummary},   {"distribution", kDistribution},
      {"layers", kLayers},     {"drift", kDrift},
      {"extremal", kExtremal}, {"hidden", kHidden},
      {"correlation", kCorrelation}, {"regime", kRegime},
  };
  return table;
}

class Table {
 public:
  explicit Table(std::vector<std::string> header) { rows_.push_back(std::move(header)); }

  void AddRow(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  std::string Render() const {
    std::vector<std::size_t> widths;
    for (const auto& row : rows_) {
      widths.resize(std::max(widths.size(), row.size()), 0);
      for (std::size_t c = 0; c < row.size(); ++c) {
        widths[c] = std::max(widths[c], row[c].size());
      }
    }
    std::string out;
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      std::string line;
      for (std::size_t c = 0; c < rows_[r].size(); ++c) {
        if (c == 0) {
          line += fmt::format("{:<{}}", rows_[r][c], widths[c]);
        } else {
          line += fmt::format("  {:>{}}", rows_[r][c], widths[c]);
        }
      }
      while (!line.empty() && line.back() == ' ') line.pop_back();
      out += line + '\n';
      if (r == 0) {
        std::size_t total = 0;
        for (std::size_t c = 0; c < widths.size(); ++c) total += widths[c] + (c ? 2 : 0);
        out += std::string(total, '-') + '\n';
      }
    }
    return out;
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

class KvWriter {
 public:
  void Add(const std::string& key, double value) {
    out_ += key + '=' + csv::FormatDouble(value) + '\n';
  }
  void Add(const std::string& key, std::int64_t value) {
    out_ += key + '=' + std::to_string(value) + '\n';
  }
  void Add(const std::string& key, std::size_t value) {
    out_ += key + '=' + std::to_string(value) + '\n';
  }
  void Add(const std::string& key, int value) {
    out_ += key + '=' + std::to_string(value) + '\n';
  }
  void AddText(const std::string& key, std::string_view value) {
    out_ += key + '=' + std::string(value) + '\n';
  }
  void AddProfile(const std::string& key, const DistributionProfile& p) {
    Add(key + ".mean", p.mean);
    Add(key + ".sd", p.sd);
    Add(key + ".median", p.median);
    Add(key + ".p10", p.p10);
    Add(key + ".p90", p.p90);
    Add(key + ".min", p.min);
    Add(key + ".max", p.max);
    Add(key + ".n", p.n);
  }
  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

std::string Fixed(double v) { return fmt::format("{:.3f}", v); }
std::string Signed(double v) { return fmt::format("{:+.3f}", v); }
std::string MeanSd(const DistributionProfile& p) {
  return fmt::format("{:.3f} ({:.3f})", p.mean, p.sd);
}
std::string PlusMinus(const DistributionProfile& p) {
  return fmt::format("{:.3f} ± {:.3f}", p.mean, p.sd);
}

template <typename T, typename Fn>
std::string Or(const std::optional<T>& v, Fn fn) {
  return v ? fn(*v) : std::string(kNotAvailable);
}

std::vector<std::string> Header(std::string_view first, std::span<const Column> columns) {
  std::vector<std::string> h{std::string(first)};
  for (const auto& c : columns) h.push_back(c.label);
  return h;
}

std::string Heading(std::string_view title) {
  return fmt::format("== {} ==\n", title);
}

template <typename T>
struct Outcome {
  std::optional<T> value;
  std::string error;
};

template <typename Fn>
auto Attempt(Fn fn) -> Outcome<decltype(fn())> {
  try {
    return {fn(), {}};
  } catch (const Error& e) {
    return {std::nullopt, e.what()};
  }
}

class Renderer {
 public:
  Renderer(std::span<const Column> columns, const ReportOptions& options)
      : columns_(columns), options_(options) {
    for (const auto& c : columns_) {
      summaries_.push_back(Attempt([&] { return analysis::SummarizeGenPhase(c.trace); }));
      drifts_.push_back(
          Attempt([&] { return analysis::EarlyLateDrift(c.trace, options_.fraction); }));
    }
  }

  void Preamble(std::string_view title) {
    text_ += fmt::format("# {}\n", title);
    text_ += fmt::format("# models: {}\n", columns_.size());
    text_ += fmt::format(
        "# entropy unit: nats; drift window fraction: {}; regime tau: {}; "
        "extremal k: {}; correlation: {}\n\n",
        csv::FormatDouble(options_.fraction), csv::FormatDouble(options_.tau),
        options_.extremal_k, GranularityName());
    kv_.AddText("config.log_base", "e");
    kv_.Add("config.fraction", options_.fraction);
    kv_.Add("config.tau", options_.tau);
    kv_.Add("config.extremal_k", options_.extremal_k);
    kv_.AddText("config.correlation_granularity", GranularityName());
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      kv_.AddText(fmt::format("model.{}.id", columns_[i].label),
                  columns_[i].trace.model_id());
    }
  }

  void Summary() {
    text_ += Heading("Summary (GEN phase, mean (sd))");
    Table t(Header("metric", columns_));
    std::vector<std::string> prompt{"prompt_tokens"}, gen{"gen_tokens"},
        gen_mean{"gen_tokens_mean"}, entropy{"output_entropy"}, top1{"top1_prob"},
        gap{"top1_top2_gap"}, attn{"attn_entropy"}, hdi{"hdi"}, kv{"kv_total_max_mb"};
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      const auto& s = summaries_[i];
      const std::string key = "summary." + columns_[i].label;
      if (!s.value) {
        for (auto* row : {&prompt, &gen, &gen_mean, &entropy, &top1, &gap, &attn, &hdi, &kv}) {
          row->push_back(std::string(kNotAvailable));
        }
        Skip(key, s.error);
        continue;
      }
      const auto& p = *s.value;
      prompt.push_back(Or(p.prompt_tokens, [](double v) { return fmt::format("{:.1f}", v); }));
      gen.push_back(std::to_string(p.gen_tokens));
      gen_mean.push_back(fmt::format("{:.1f}", p.gen_tokens_mean));
      entropy.push_back(MeanSd(p.output_entropy));
      top1.push_back(MeanSd(p.top1_prob));
      gap.push_back(Fixed(p.top1_top2_gap_mean));
      attn.push_back(Or(p.attn_entropy, MeanSd));
      hdi.push_back(Or(p.hdi, MeanSd));
      kv.push_back(Or(p.kv_total_max_bytes, [](std::int64_t b) {
        return Fixed(static_cast<double>(b) / (1024.0 * 1024.0));
      }));

      kv_.Add(key + ".num_prompts", p.num_prompts);
      if (p.prompt_tokens) kv_.Add(key + ".prompt_tokens", *p.prompt_tokens);
      kv_.Add(key + ".gen_tokens", p.gen_tokens);
      kv_.Add(key + ".gen_tokens_mean", p.gen_tokens_mean);
      kv_.AddProfile(key + ".output_entropy", p.output_entropy);
      kv_.AddProfile(key + ".top1_prob", p.top1_prob);
      kv_.Add(key + ".top1_top2_gap_mean", p.top1_top2_gap_mean);
      if (p.attn_entropy) kv_.AddProfile(key + ".attn_entropy", *p.attn_entropy);
      if (p.hdi) kv_.AddProfile(key + ".hdi", *p.hdi);
      if (p.kv_total_max_bytes) kv_.Add(key + ".kv_total_max_bytes", *p.kv_total_max_bytes);
    }
    for (auto* row : {&prompt, &gen, &gen_mean, &entropy, &top1, &gap, &attn, &hdi, &kv}) {
      t.AddRow(std::move(*row));
    }
    text_ += t.Render();
    FlushNotices();
  }

  void Distribution() {
    text_ += Heading("Distribution profiles (GEN phase)");
    DistributionBlock("output_entropy", [](const analysis::SummaryProfile& p) {
      return std::optional<DistributionProfile>(p.output_entropy);
    });
    DistributionBlock("attn_entropy", [](const analysis::SummaryProfile& p) {
      return p.attn_entropy;
    });
    FlushNotices();
  }

  void Layers() {
    text_ += Heading("Layer-wise attention entropy");
    std::vector<analysis::LayerProfile> profiles;
    std::vector<std::size_t> included;
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      auto p = Attempt([&] { return analysis::ComputeLayerProfile(columns_[i].trace); });
      if (!p.value) {
        Skip("layers." + columns_[i].label, p.error);
        continue;
      }
      profiles.push_back(std::move(*p.value));
      included.push_back(i);
    }
    if (!included.empty()) {
      Table t(IncludedHeader("metric", included));
      std::vector<std::string> n{"num_layers"}, mean{"mean_layer_entropy"},
          sd{"sd_across_layers"}, low{"lowest_layer"}, high{"highest_layer"},
          hdi{"mean_hdi"};
      for (std::size_t k = 0; k < included.size(); ++k) {
        const auto& p = profiles[k];
        const std::string key = "layers." + columns_[included[k]].label;
        n.push_back(std::to_string(p.num_layers));
        mean.push_back(Fixed(p.mean_layer_entropy));
        sd.push_back(Fixed(p.sd_across_layers));
        low.push_back(fmt::format("L{} ({:.3f})", p.lowest.layer, p.lowest.entropy));
        high.push_back(fmt::format("L{} ({:.3f})", p.highest.layer, p.highest.entropy));
        hdi.push_back(Fixed(p.mean_hdi));
        kv_.Add(key + ".num_layers", p.num_layers);
        kv_.Add(key + ".mean_layer_entropy", p.mean_layer_entropy);
        kv_.Add(key + ".sd_across_layers", p.sd_across_layers);
        kv_.Add(key + ".lowest.layer", p.lowest.layer);
        kv_.Add(key + ".lowest.entropy", p.lowest.entropy);
        kv_.Add(key + ".highest.layer", p.highest.layer);
        kv_.Add(key + ".highest.entropy", p.highest.entropy);
        kv_.Add(key + ".mean_hdi", p.mean_hdi);
        for (const auto& stat : p.per_layer) {
          const std::string lk = fmt::format("{}.layer.{}", key, stat.layer);
          kv_.Add(lk + ".entropy", stat.entropy);
          kv_.Add(lk + ".hdi", stat.hdi);
        }
      }
      for (auto* row : {&n, &mean, &sd, &low, &high, &hdi}) t.AddRow(std::move(*row));
      text_ += t.Render();

      for (std::size_t k = 0; k < included.size(); ++k) {
        text_ += fmt::format("\n{} per layer:\n", columns_[included[k]].label);
        Table pl({"layer", "attn_entropy", "hdi"});
        for (const auto& stat : profiles[k].per_layer) {
          pl.AddRow({std::to_string(stat.layer), Fixed(stat.entropy), Fixed(stat.hdi)});
        }
        text_ += pl.Render();
      }
    }
    FlushNotices();
  }

  void Drift() {
    text_ += Heading(fmt::format("Early vs late drift (first/last {}% of GEN steps)",
                                 csv::FormatDouble(options_.fraction * 100.0)));
    Table t(Header("metric", columns_));
    std::vector<std::string> oe{"output_entropy_early"}, ol{"output_entropy_late"},
        od{"delta_output"}, ae{"attn_entropy_early"}, al{"attn_entropy_late"},
        ad{"delta_attn"}, w{"window_steps"};
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      const auto& d = drifts_[i];
      const std::string key = "drift." + columns_[i].label;
      if (!d.value) {
        for (auto* row : {&oe, &ol, &od, &ae, &al, &ad, &w}) {
          row->push_back(std::string(kNotAvailable));
        }
        Skip(key, d.error);
        continue;
      }
      const auto& r = *d.value;
      oe.push_back(Fixed(r.output_entropy.early_mean));
      ol.push_back(Fixed(r.output_entropy.late_mean));
      od.push_back(Signed(r.output_entropy.delta));
      ae.push_back(Or(r.attn_entropy, [](const analysis::SignalDrift& s) { return Fixed(s.early_mean); }));
      al.push_back(Or(r.attn_entropy, [](const analysis::SignalDrift& s) { return Fixed(s.late_mean); }));
      ad.push_back(Or(r.attn_entropy, [](const analysis::SignalDrift& s) { return Signed(s.delta); }));
      w.push_back(std::to_string(r.window_steps));
      kv_.Add(key + ".window_steps", r.window_steps);
      kv_.Add(key + ".output_entropy.early_mean", r.output_entropy.early_mean);
      kv_.Add(key + ".output_entropy.late_mean", r.output_entropy.late_mean);
      kv_.Add(key + ".output_entropy.delta", r.output_entropy.delta);
      if (r.attn_entropy) {
        kv_.Add(key + ".attn_entropy.early_mean", r.attn_entropy->early_mean);
        kv_.Add(key + ".attn_entropy.late_mean", r.attn_entropy->late_mean);
        kv_.Add(key + ".attn_entropy.delta", r.attn_entropy->delta);
      }
    }
    for (auto* row : {&oe, &ol, &od, &ae, &al, &ad, &w}) t.AddRow(std::move(*row));
    text_ += t.Render();
    FlushNotices();
  }

  void Extremal() {
    text_ += Heading("Extremal attention-entropy layers");
    bool first = true;
    for (const auto& c : columns_) {
      const std::string key = "extremal." + c.label;
      auto ex = Attempt([&] {
        const int k = std::min(options_.extremal_k, c.trace.num_layers());
        return analysis::FindExtremalLayers(c.trace, k);
      });
      if (!ex.value) {
        Skip(key, ex.error);
        continue;
      }
      text_ += fmt::format("{}{}:\n", first ? "" : "\n", c.label);
      first = false;
      Table t({"low_layer", "entropy", "hdi", "high_layer", "entropy", "hdi"});
      for (std::size_t r = 0; r < ex.value->lowest.size(); ++r) {
        const auto& lo = ex.value->lowest[r];
        const auto& hi = ex.value->highest[r];
        t.AddRow({std::to_string(lo.layer), Fixed(lo.entropy), Fixed(lo.hdi),
                  std::to_string(hi.layer), Fixed(hi.entropy), Fixed(hi.hdi)});
        const std::string rk = fmt::format("{}.{}", key, r + 1);
        kv_.Add(rk + ".lowest.layer", lo.layer);
        kv_.Add(rk + ".lowest.entropy", lo.entropy);
        kv_.Add(rk + ".lowest.hdi", lo.hdi);
        kv_.Add(rk + ".highest.layer", hi.layer);
        kv_.Add(rk + ".highest.entropy", hi.entropy);
        kv_.Add(rk + ".highest.hdi", hi.hdi);
      }
      text_ += t.Render();
    }
    FlushNotices();
  }

  void Hidden() {
    text_ += Heading("Hidden representation magnitude and drift (mean ± sd)");
    Table t(Header("metric", columns_));
    std::vector<std::string> l2{"hidden_l2"}, step{"delta_l2_prev_step"},
        layer{"delta_l2_prev_layer"};
    for (const auto& c : columns_) {
      const std::string key = "hidden." + c.label;
      auto h = Attempt([&] { return analysis::ComputeHiddenStats(c.trace); });
      if (!h.value) {
        for (auto* row : {&l2, &step, &layer}) row->push_back(std::string(kNotAvailable));
        Skip(key, h.error);
        continue;
      }
      l2.push_back(PlusMinus(h.value->hidden_l2));
      step.push_back(Or(h.value->delta_prev_step, PlusMinus));
      layer.push_back(Or(h.value->delta_prev_layer, PlusMinus));
      kv_.AddProfile(key + ".hidden_l2", h.value->hidden_l2);
      if (h.value->delta_prev_step) {
        kv_.AddProfile(key + ".delta_l2_prev_step", *h.value->delta_prev_step);
      }
      if (h.value->delta_prev_layer) {
        kv_.AddProfile(key + ".delta_l2_prev_layer", *h.value->delta_prev_layer);
      }
    }
    for (auto* row : {&l2, &step, &layer}) t.AddRow(std::move(*row));
    text_ += t.Render();
    FlushNotices();
  }

  void Correlation() {
    text_ += Heading(fmt::format("Correlation matrix (Pearson, {} records pooled over "
                                 "all models)",
                                 GranularityName()));
    std::vector<analysis::ModelTrace> traces;
    for (const auto& c : columns_) traces.push_back(c.trace);
    // Keep metrics that actually have observations in these traces.
    const auto& all = analysis::CorrelationMetrics();
    std::vector<std::string> metrics;
    auto records = Attempt([&] {
      return analysis::JointRecords(traces, all, options_.granularity);
    });
    if (records.value) {
      for (std::size_t m = 0; m < all.size(); ++m) {
        std::size_t n = 0;
        for (const auto& r : *records.value) n += r[m].has_value() ? 1 : 0;
        if (n >= 3) metrics.push_back(all[m]);
      }
    }
    auto matrix = Attempt([&] {
      return analysis::ComputeCorrelationMatrix(traces, metrics, options_.granularity);
    });
    if (!matrix.value || metrics.empty()) {
      Skip("correlation", matrix.value ? "no metric has >= 3 observations" : matrix.error);
      FlushNotices();
      return;
    }
    std::vector<std::string> header{"metric"};
    for (const auto& m : metrics) header.push_back(m);
    Table t(std::move(header));
    for (std::size_t i = 0; i < metrics.size(); ++i) {
      std::vector<std::string> row{metrics[i]};
      for (std::size_t j = 0; j < metrics.size(); ++j) {
        const auto& r = matrix.value->r[i][j];
        row.push_back(r ? Fixed(*r) : std::string(kNotAvailable));
        if (r) {
          kv_.Add(fmt::format("correlation.{}.{}", metrics[i], metrics[j]), *r);
        } else {
          kv_.AddText(fmt::format("correlation.{}.{}", metrics[i], metrics[j]),
                      "undefined");
        }
      }
      t.AddRow(std::move(row));
    }
    kv_.Add("correlation.observations", matrix.value->n[0][0]);
    text_ += t.Render();
    FlushNotices();
  }

  void Regime() {
    text_ += Heading(fmt::format("Regime classification (tau = {})",
                                 csv::FormatDouble(options_.tau)));
    Table t(Header("metric", columns_));
    std::vector<std::string> label{"regime"}, delta{"delta_output_entropy"},
        mean{"mean_output_entropy"}, sd{"sd_output_entropy"};
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      const std::string key = "regime." + columns_[i].label;
      if (!summaries_[i].value || !drifts_[i].value) {
        for (auto* row : {&label, &delta, &mean, &sd}) {
          row->push_back(std::string(kNotAvailable));
        }
        Skip(key, summaries_[i].value ? drifts_[i].error : summaries_[i].error);
        continue;
      }
      const auto r =
          analysis::ClassifyRegime(*drifts_[i].value, *summaries_[i].value, options_.tau);
      label.push_back(std::string(analysis::RegimeName(r.label)));
      delta.push_back(Signed(r.delta_output_entropy));
      mean.push_back(Fixed(r.mean_output_entropy));
      sd.push_back(Fixed(r.sd_output_entropy));
      kv_.AddText(key + ".label", analysis::RegimeName(r.label));
      kv_.Add(key + ".delta_output_entropy", r.delta_output_entropy);
      kv_.Add(key + ".mean_output_entropy", r.mean_output_entropy);
      kv_.Add(key + ".sd_output_entropy", r.sd_output_entropy);
      kv_.Add(key + ".tau", r.tau);
    }
    for (auto* row : {&label, &delta, &mean, &sd}) t.AddRow(std::move(*row));
    text_ += t.Render();
    FlushNotices();
  }

  Report Finish() { return {text_, kv_.str()}; }

 private:
  std::string GranularityName() const {
    return options_.granularity == analysis::CorrelationGranularity::kPerStep
               ? "per-step"
               : "per-model";
  }

  std::vector<std::string> IncludedHeader(std::string_view first,
                                          const std::vector<std::size_t>& included) {
    std::vector<std::string> h{std::string(first)};
    for (std::size_t i : included) h.push_back(columns_[i].label);
    return h;
  }

  template <typename Fn>
  void DistributionBlock(std::string_view name, Fn select) {
    text_ += fmt::format("{}:\n", name);
    Table t(Header("stat", columns_));
    std::vector<std::vector<std::string>> rows = {{"mean"}, {"sd"}, {"median"}, {"p10"},
                                                  {"p90"},  {"min"}, {"max"},  {"n"}};
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      const std::string key = fmt::format("distribution.{}.{}", columns_[i].label, name);
      std::optional<DistributionProfile> p;
      if (summaries_[i].value) {
        p = select(*summaries_[i].value);
        if (!p) Skip(key, fmt::format("model '{}': attention fields absent",
                                      columns_[i].trace.model_id()));
      } else {
        Skip(key, summaries_[i].error);
      }
      if (!p) {
        for (auto& row : rows) row.push_back(std::string(kNotAvailable));
        continue;
      }
      const double values[] = {p->mean, p->sd, p->median, p->p10, p->p90, p->min, p->max};
      for (std::size_t r = 0; r < 7; ++r) rows[r].push_back(Fixed(values[r]));
      rows[7].push_back(std::to_string(p->n));
      kv_.AddProfile(key, *p);
    }
    for (auto& row : rows) t.AddRow(std::move(row));
    text_ += t.Render();
  }

  void Skip(const std::string& key, const std::string& reason) {
    notices_.push_back(fmt::format("[skipped] {}: {}", key, reason));
    kv_.AddText(key + ".skipped", reason);
  }

  void FlushNotices() {
    for (const auto& n : notices_) text_ += n + '\n';
    notices_.clear();
    text_ += '\n';
  }

  std::span<const Column> columns_;
  ReportOptions options_;
  std::vector<Outcome<analysis::SummaryProfile>> summaries_;
  std::vector<Outcome<analysis::DriftReport>> drifts_;
  std::string text_;
  KvWriter kv_;
  std::vector<std::string> notices_;
};

}  // namespace

unsigned ParseSections(std::string_view list) {
  unsigned mask = 0;
  std::size_t start = 0;
  while (start <= list.size()) {
    const std::size_t end = std::min(list.find(',', start), list.size());
    std::string_view name = list.substr(start, end - start);
    while (!name.empty() && name.front() == ' ') name.remove_prefix(1);
    while (!name.empty() && name.back() == ' ') name.remove_suffix(1);
    if (name == "all") {
      mask |= kAllSections;
    } else if (!name.empty()) {
      const auto& table = SectionTable();
      const auto it = std::find_if(table.begin(), table.end(),
                                   [&](const auto& e) { return e.first == name; });
      if (it == table.end()) {
        Fail(ErrorCode::kInvalidArgument, fmt::format("unknown section '{}'", name));
      }
      mask |= it->second;
    }
    start = end + 1;
  }
  if (mask == 0) Fail(ErrorCode::kInvalidArgument, "no report sections selected");
  return mask;
}

std::vector<std::string> SectionNames(unsigned sections) {
  std::vector<std::string> out;
  for (const auto& [name, bit] : SectionTable()) {
    if (sections & bit) out.emplace_back(name);
  }
  return out;
}

std::vector<Column> ColumnsByModel(std::vector<std::vector<trace::TraceRow>> inputs) {
  std::vector<trace::TraceRow> all;
  for (auto& rows : inputs) {
    for (auto& row : rows) all.push_back(std::move(row));
  }
  std::vector<Column> out;
  for (auto& t : analysis::ModelTrace::Group(std::move(all))) {
    std::string label = t.model_id();
    out.push_back({std::move(label), std::move(t)});
  }
  return out;
}

std::vector<Column> ColumnsPerInput(std::vector<std::vector<trace::TraceRow>> inputs) {
  std::vector<Column> out;
  std::map<std::string, int> seen;
  for (auto& rows : inputs) {
    for (auto& t : analysis::ModelTrace::Group(std::move(rows))) {
      const int count = ++seen[t.model_id()];
      std::string label =
          count == 1 ? t.model_id() : fmt::format("{}#{}", t.model_id(), count);
      out.push_back({std::move(label), std::move(t)});
    }
  }
  return out;
}

Report RenderAnalysis(std::span<const Column> columns, const ReportOptions& options) {
  if (columns.empty()) Fail(ErrorCode::kInvalidArgument, "no traces to analyze");
  Renderer r(columns, options);
  r.Preamble("tracescope analysis");
  if (options.sections & kSummary) r.Summary();
  if (options.sections & kDistribution) r.Distribution();
  if (options.sections & kLayers) r.Layers();
  if (options.sections & kDrift) r.Drift();
  if (options.sections & kExtremal) r.Extremal();
  if (options.sections & kHidden) r.Hidden();
  if (options.sections & kCorrelation) r.Correlation();
  if (options.sections & kRegime) r.Regime();
  return r.Finish();
}

Report RenderComparison(std::span<const Column> columns, const ReportOptions& options) {
  if (columns.size() < 2) {
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("comparison needs at least 2 traces, got {}", columns.size()));
  }
  Renderer r(columns, options);
  r.Preamble("tracescope comparison");
  r.Summary();
  r.Drift();
  r.Regime();
  r.Correlation();
  return r.Finish();
}

}  // namespace tracescope::report
