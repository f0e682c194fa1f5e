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

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <doctest.h>

#include "tracescope/tracescope.h"

namespace fs = std::filesystem;

namespace {

ts_model* MakeModel(uint64_t seed) {
  ts_model_config config;
  ts_model_config_init(&config);
  config.vocab_size = 32;
  config.num_layers = 2;
  config.num_heads = 2;
  config.d_model = 8;
  config.seed = seed;
  ts_model* model = nullptr;
  REQUIRE(ts_model_create(&config, &model) == TS_OK);
  return model;
}

ts_trace* Decode(ts_model* model, int64_t max_steps, const char* prompt_id = "p0") {
  const int32_t prompt[] = {1, 2, 3, 4};
  ts_decode_options options;
  ts_decode_options_init(&options);
  options.max_steps = max_steps;
  ts_trace* trace = nullptr;
  REQUIRE(ts_decode_trace(model, prompt_id, prompt, 4, &options, &trace) == TS_OK);
  return trace;
}

fs::path TempDir() {
  auto dir = fs::temp_directory_path() / ("tracescope_c_api_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("metric functions") {
  const double logits[] = {1.0, 2.0, 3.0};
  double p[3];
  REQUIRE(ts_softmax(logits, 3, p) == TS_OK);
  CHECK(p[2] == doctest::Approx(0.66524096).epsilon(1e-7));
  double h = -1;
  REQUIRE(ts_shannon_entropy(p, 3, &h) == TS_OK);
  CHECK(h > 0);
  const double uniform[] = {0.25, 0.25, 0.25, 0.25};
  REQUIRE(ts_shannon_entropy(uniform, 4, &h) == TS_OK);
  CHECK(std::abs(h - std::log(4.0)) < 1e-12);
  double top1 = 0, gap = 0;
  const double q[] = {0.97, 0.03};
  REQUIRE(ts_top1_prob(q, 2, &top1) == TS_OK);
  REQUIRE(ts_top1_top2_gap(q, 2, &gap) == TS_OK);
  CHECK(top1 == 0.97);
  CHECK(gap == doctest::Approx(0.94));

  const double attn[] = {0.9, 0.1, 0.5, 0.5};
  double heads[2], mean = 0, hdi = 0;
  REQUIRE(ts_attention_entropy(attn, 2, 2, heads, &mean, &hdi) == TS_OK);
  CHECK(mean == doctest::Approx(0.5091).epsilon(1e-3));
  CHECK(hdi == doctest::Approx(0.1840).epsilon(1e-3));

  const double a[] = {3.0, 4.0}, b[] = {0.0, 0.0};
  double l2 = 0, d = 0;
  REQUIRE(ts_hidden_l2(a, 2, &l2) == TS_OK);
  REQUIRE(ts_delta_l2(a, b, 2, &d) == TS_OK);
  CHECK(l2 == 5.0);
  CHECK(d == 5.0);

  ts_kv_shape shape{4, 4, 8, 10, 4};
  int64_t per_layer = 0, total = 0;
  REQUIRE(ts_kv_bytes(&shape, &per_layer, &total) == TS_OK);
  CHECK(per_layer == 2560);
  CHECK(total == 10240);
}

TEST_CASE("errors map to status codes with messages") {
  const double bad[] = {0.5, 0.7};
  double h = 0;
  CHECK(ts_shannon_entropy(bad, 2, &h) == TS_ERROR_INVALID_ARGUMENT);
  CHECK(std::strlen(ts_last_error_message()) > 0);
  CHECK(ts_shannon_entropy(nullptr, 2, &h) == TS_ERROR_INVALID_ARGUMENT);
  CHECK(ts_shannon_entropy(bad, 2, nullptr) == TS_ERROR_INVALID_ARGUMENT);

  ts_model_config config;
  ts_model_config_init(&config);
  config.d_model = 30;
  ts_model* model = nullptr;
  CHECK(ts_model_create(&config, &model) == TS_ERROR_INVALID_ARGUMENT);
  CHECK(model == nullptr);
  CHECK(std::string(ts_last_error_message()).find("divisible") != std::string::npos);

  ts_trace* trace = nullptr;
  CHECK(ts_trace_read_file("/nonexistent/trace.csv", &trace) == TS_ERROR_IO);
  CHECK(std::string(ts_last_error_message()).find("/nonexistent/trace.csv") != std::string::npos);
  const char text[] = "model_id,prompt_id,phase,step,layer,bogus\n";
  CHECK(ts_trace_parse(text, sizeof(text) - 1, &trace) == TS_ERROR_DATA);
  CHECK(std::string(ts_status_string(TS_ERROR_DATA)) == "data error");
  CHECK(std::string(ts_version()) == "0.1.0");
}

TEST_CASE("decode, write, read back") {
  ts_model* model = MakeModel(3);
  CHECK(std::string(ts_model_id(model)) == "toy-v32-l2-h2-d8-s3");
  ts_trace* trace = Decode(model, 6);
  CHECK(ts_trace_stop_reason(trace) == TS_STOP_MAX_STEPS);
  const int32_t* ids = nullptr;
  size_t n = 0;
  REQUIRE(ts_trace_generated_ids(trace, &ids, &n) == TS_OK);
  CHECK(n == 6);
  // 1 prompt step + 6 GEN steps, each with summary + embedding + 2 blocks.
  CHECK(ts_trace_row_count(trace) == 7 * 4);

  ts_trace_row row;
  REQUIRE(ts_trace_get_row(trace, 0, &row) == TS_OK);
  CHECK(row.phase == TS_PHASE_PROMPT);
  CHECK(row.layer == -1);
  CHECK((row.present & TS_FIELD_OUTPUT_ENTROPY) != 0);
  CHECK((row.present & TS_FIELD_TOKEN_ID) == 0);
  CHECK(ts_trace_get_row(trace, 1000, &row) == TS_ERROR_INVALID_ARGUMENT);

  const auto dir = TempDir();
  const auto path = (dir / "t.csv").string();
  uint64_t bytes = 0;
  REQUIRE(ts_trace_write_file(trace, path.c_str(), &bytes) == TS_OK);
  CHECK(bytes == fs::file_size(path));

  ts_trace* back = nullptr;
  REQUIRE(ts_trace_read_file(path.c_str(), &back) == TS_OK);
  char* a = nullptr;
  char* b = nullptr;
  size_t len = 0;
  REQUIRE(ts_trace_format(trace, &a, &len) == TS_OK);
  REQUIRE(ts_trace_format(back, &b, nullptr) == TS_OK);
  CHECK(std::string(a) == std::string(b));
  CHECK(len == bytes);
  const int32_t* back_ids = nullptr;
  size_t back_n = 0;
  REQUIRE(ts_trace_generated_ids(back, &back_ids, &back_n) == TS_OK);
  CHECK(std::vector<int32_t>(ids, ids + n) == std::vector<int32_t>(back_ids, back_ids + back_n));

  ts_trace* parsed = nullptr;
  REQUIRE(ts_trace_parse(a, std::strlen(a), &parsed) == TS_OK);
  CHECK(ts_trace_row_count(parsed) == ts_trace_row_count(trace));
  ts_string_free(a);
  ts_string_free(b);

  ts_gen_summary summary;
  REQUIRE(ts_summarize_gen_phase(back, &summary) == TS_OK);
  CHECK(summary.gen_tokens == 6);
  CHECK(summary.has_prompt_tokens);
  CHECK(summary.prompt_tokens == 4.0);
  CHECK(summary.has_attention);
  CHECK(summary.output_entropy.n == 6);

  ts_drift drift;
  REQUIRE(ts_early_late_drift(back, 0.2, &drift) == TS_OK);
  CHECK(drift.window_steps == 1);
  ts_regime regime;
  REQUIRE(ts_classify_regime(&drift, &summary, 0.1, &regime) == TS_OK);
  CHECK(std::string(ts_regime_name(regime)).size() > 0);

  ts_summary* records = nullptr;
  REQUIRE(ts_summary_create(&records) == TS_OK);
  const int32_t prompt[] = {1, 2, 3, 4};
  ts_decode_options options;
  ts_decode_options_init(&options);
  options.max_steps = 6;
  REQUIRE(ts_summary_add(records, trace, prompt, 4, "t.csv", &options) == TS_OK);
  CHECK(ts_summary_add(records, trace, prompt, 4, "t.csv", &options) ==
        TS_ERROR_INVALID_ARGUMENT);
  const auto summary_path = (dir / "summary.csv").string();
  REQUIRE(ts_summary_write_file(records, summary_path.c_str(), nullptr) == TS_OK);
  ts_summary* read = nullptr;
  REQUIRE(ts_summary_read_file(summary_path.c_str(), &read) == TS_OK);
  CHECK(ts_summary_record_count(read) == 1);

  ts_summary_destroy(read);
  ts_summary_destroy(records);
  ts_trace_destroy(parsed);
  ts_trace_destroy(back);
  ts_trace_destroy(trace);
  ts_model_destroy(model);
  fs::remove_all(dir);
}

TEST_CASE("reports through the C surface") {
  ts_model* m1 = MakeModel(1);
  ts_model* m2 = MakeModel(2);
  ts_trace* t1 = Decode(m1, 12);
  ts_trace* t2 = Decode(m2, 12);
  const ts_trace* traces[] = {t1, t2};

  ts_report_options options;
  ts_report_options_init(&options);
  CHECK(options.sections == TS_SECTION_ALL);
  CHECK(options.fraction == 0.2);
  CHECK(options.tau == 0.1);
  char* text = nullptr;
  char* kv = nullptr;
  REQUIRE(ts_render_report(traces, 2, TS_REPORT_ANALYZE, &options, &text, &kv) == TS_OK);
  CHECK(std::string(kv).find("regime.toy-v32-l2-h2-d8-s1.label=") != std::string::npos);
  CHECK(std::string(text).find("toy-v32-l2-h2-d8-s2") != std::string::npos);
  ts_string_free(text);
  ts_string_free(kv);

  REQUIRE(ts_parse_sections("summary,regime", &options.sections) == TS_OK);
  CHECK(options.sections == (TS_SECTION_SUMMARY | TS_SECTION_REGIME));
  CHECK(ts_parse_sections("nope", &options.sections) == TS_ERROR_INVALID_ARGUMENT);

  REQUIRE(ts_render_report(traces, 2, TS_REPORT_COMPARE, &options, &text, nullptr) == TS_OK);
  CHECK(std::string(text).find("comparison") != std::string::npos);
  ts_string_free(text);
  CHECK(ts_render_report(traces, 1, TS_REPORT_COMPARE, &options, &text, &kv) ==
        TS_ERROR_INVALID_ARGUMENT);

  ts_trace_destroy(t1);
  ts_trace_destroy(t2);
  ts_model_destroy(m1);
  ts_model_destroy(m2);
}

TEST_CASE("agreement and distribution") {
  const char* a[] = {"x", "x", "y", "y"};
  const char* b[] = {"x", "y", "y", "y"};
  double percent = 0, kappa = 0;
  int defined = 0;
  REQUIRE(ts_inter_rater_agreement(a, b, 4, &percent, &kappa, &defined) == TS_OK);
  CHECK(percent == 0.75);
  CHECK(defined == 1);
  CHECK(kappa == doctest::Approx(0.5));
  const char* c[] = {"x", "x"};
  REQUIRE(ts_inter_rater_agreement(c, c, 2, &percent, &kappa, &defined) == TS_OK);
  CHECK(defined == 0);

  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  ts_distribution d;
  REQUIRE(ts_distribution_profile(v.data(), v.size(), &d) == TS_OK);
  CHECK(d.p10 == doctest::Approx(10.9));
  CHECK(d.n == 100);
  CHECK(ts_distribution_profile(v.data(), 0, &d) != TS_OK);
}
