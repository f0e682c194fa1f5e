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

#include <string>
#include <vector>

#include <doctest.h>

#include "synthetic.hpp"
#include "tracescope/error.hpp"
#include "tracescope/report.hpp"

using namespace tracescope;
using namespace tracescope::report;
using testing::MakeTrace;
using testing::SyntheticSpec;

namespace {

std::vector<trace::TraceRow> Rows(const std::string& model, double start, double delta,
                                  bool attention) {
  SyntheticSpec shape;
  shape.model_id = model;
  shape.gen_entropy = testing::StepEntropies(20, start, delta);
  if (attention) {
    for (std::size_t i = 0; i < 20; ++i) shape.attn.push_back({1.0 + 0.01 * i, 2.0});
  }
  shape.hidden = attention;
  return MakeTrace(shape);
}

bool Contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("section parsing") {
  CHECK(ParseSections("all") == kAllSections);
  CHECK(ParseSections("summary,drift") == (kSummary | kDrift));
  CHECK(ParseSections(" regime , layers ") == (kRegime | kLayers));
  CHECK_THROWS_AS(ParseSections("summary,bogus"), Error);
  CHECK_THROWS_AS(ParseSections(""), Error);
  CHECK(SectionNames(kSummary | kRegime) == std::vector<std::string>{"summary", "regime"});
}

TEST_CASE("analysis without attention skips layer sections only") {
  const auto columns = ColumnsByModel({Rows("m", 1.0, 0.5, false)});
  const auto r = RenderAnalysis(columns, ReportOptions{});
  CHECK(Contains(r.text, "[skipped] layers.m"));
  CHECK(Contains(r.kv, "layers.m.skipped="));
  CHECK(Contains(r.text, "Summary"));
  CHECK(Contains(r.kv, "summary.m.output_entropy.mean="));
  CHECK(Contains(r.kv, "drift.m.output_entropy.delta=0.5"));
  CHECK(Contains(r.kv, "regime.m.label=exploratory"));
}

TEST_CASE("reports are deterministic and column per model") {
  auto input = [] {
    auto a = Rows("alpha", 1.0, -0.5, true);
    auto b = Rows("beta", 1.0, 0.5, true);
    a.insert(a.end(), b.begin(), b.end());
    return std::vector<std::vector<trace::TraceRow>>{a};
  };
  const auto c1 = ColumnsByModel(input());
  const auto c2 = ColumnsByModel(input());
  REQUIRE(c1.size() == 2);
  CHECK(c1[0].label == "alpha");
  CHECK(c1[1].label == "beta");
  const auto r1 = RenderAnalysis(c1, ReportOptions{});
  const auto r2 = RenderAnalysis(c2, ReportOptions{});
  CHECK(r1.text == r2.text);
  CHECK(r1.kv == r2.kv);
  CHECK(Contains(r1.kv, "regime.alpha.label=deterministic"));
  CHECK(Contains(r1.kv, "regime.beta.label=exploratory"));
  CHECK_FALSE(Contains(r1.text, "[skipped]"));
}

TEST_CASE("section selection") {
  const auto columns = ColumnsByModel({Rows("m", 1.0, 0.0, true)});
  ReportOptions options;
  options.sections = kSummary;
  const auto r = RenderAnalysis(columns, options);
  CHECK(Contains(r.kv, "summary.m."));
  CHECK_FALSE(Contains(r.kv, "drift."));
  CHECK_FALSE(Contains(r.kv, "regime."));
  CHECK(Contains(RenderAnalysis(columns, ReportOptions{}).kv, "regime.m.label=balanced"));
}

TEST_CASE("comparison labels one column per input") {
  const auto columns = ColumnsPerInput({Rows("m", 1.0, -0.5, false), Rows("m", 1.0, 0.5, false)});
  REQUIRE(columns.size() == 2);
  CHECK(columns[0].label == "m");
  CHECK(columns[1].label == "m#2");
  const auto r = RenderComparison(columns, ReportOptions{});
  CHECK(Contains(r.kv, "regime.m.label=deterministic"));
  CHECK(Contains(r.kv, "regime.m#2.label=exploratory"));
  CHECK_THROWS_AS(RenderComparison(std::span<const Column>(columns.data(), 1), ReportOptions{}),
                  Error);
}

TEST_CASE("identical inputs give identical columns") {
  const auto columns = ColumnsPerInput({Rows("x", 2.0, 0.3, true), Rows("y", 2.0, 0.3, true)});
  const auto r = RenderComparison(columns, ReportOptions{});
  CHECK(Contains(r.kv, "drift.x.output_entropy.delta="));
  auto value_of = [&](const std::string& key) {
    const auto pos = r.kv.find(key + "=");
    REQUIRE(pos != std::string::npos);
    const auto start = pos + key.size() + 1;
    return r.kv.substr(start, r.kv.find('\n', start) - start);
  };
  CHECK(value_of("drift.x.output_entropy.delta") == value_of("drift.y.output_entropy.delta"));
  CHECK(value_of("summary.x.output_entropy.mean") == value_of("summary.y.output_entropy.mean"));
  CHECK(value_of("regime.x.label") == value_of("regime.y.label"));
}

TEST_CASE("too-short traces are reported, not fatal") {
  SyntheticSpec shape;
  shape.model_id = "short";
  shape.gen_entropy = {0.5};
  const auto columns = ColumnsByModel({MakeTrace(shape)});
  const auto r = RenderAnalysis(columns, ReportOptions{});
  CHECK(Contains(r.text, "[skipped] drift.short"));
  CHECK(Contains(r.text, "[skipped] correlation"));
  CHECK(Contains(r.kv, "summary.short.gen_tokens=1"));
}
