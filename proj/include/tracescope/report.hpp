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

// Renders analysis sections as aligned text tables (one column per model)
// and as `section.label.field=value` lines for plotting tools.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tracescope/analysis.hpp"
#include "tracescope/trace.hpp"

namespace tracescope::report {

enum Section : unsigned {
  kSummary = 1u << 0,
  kDistribution = 1u << 1,
  kLayers = 1u << 2,
  kDrift = 1u << 3,
  kExtremal = 1u << 4,
  kHidden = 1u << 5,
  kCorrelation = 1u << 6,
  kRegime = 1u << 7,
  kAllSections = (1u << 8) - 1,
};

// Comma-separated section names, or "all". Throws kInvalidArgument on an
// unknown name.
unsigned ParseSections(std::string_view list);
std::vector<std::string> SectionNames(unsigned sections);

struct ReportOptions {
  unsigned sections = kAllSections;
  double fraction = 0.2;
  double tau = 0.1;
  int extremal_k = 5;
  analysis::CorrelationGranularity granularity =
      analysis::CorrelationGranularity::kPerStep;
};

struct Column {
  std::string label;
  analysis::ModelTrace trace;
};

// One column per model id; rows of the same model from several inputs are
// merged.
std::vector<Column> ColumnsByModel(std::vector<std::vector<trace::TraceRow>> inputs);
// One column per (input, model); repeated labels get a "#k" suffix.
std::vector<Column> ColumnsPerInput(std::vector<std::vector<trace::TraceRow>> inputs);

struct Report {
  std::string text;
  std::string kv;
};

// Sections that cannot be computed for a column (missing capture fields,
// too few steps) are reported as skipped; the rest are still produced.
Report RenderAnalysis(std::span<const Column> columns, const ReportOptions& options);

// Side-by-side summary, drift, regime and correlation. Needs >= 2 columns.
Report RenderComparison(std::span<const Column> columns, const ReportOptions& options);

}  // namespace tracescope::report
