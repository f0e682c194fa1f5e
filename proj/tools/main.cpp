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

// tracescope: decode toy models into traces, analyze and compare traces.
//
//   tracescope trace   --out DIR [--seed N]... [--prompt IDS]... [model flags]
//   tracescope analyze --out DIR TRACE...
//   tracescope compare --out DIR TRACE TRACE...
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tracescope/tracescope.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid arguments are the caller's fault; everything else is data.
void Check(ts_status status, const std::string& context) {
  if (status == TS_OK) return;
  std::string message = context + ": " + ts_last_error_message();
  if (status == TS_ERROR_INVALID_ARGUMENT) throw UsageError(message);
  throw DataError(message);
}

struct ModelDeleter {
  void operator()(ts_model* m) const { ts_model_destroy(m); }
};
struct TraceDeleter {
  void operator()(ts_trace* t) const { ts_trace_destroy(t); }
};
struct SummaryDeleter {
  void operator()(ts_summary* s) const { ts_summary_destroy(s); }
};
struct StringDeleter {
  void operator()(char* s) const { ts_string_free(s); }
};
using ModelPtr = std::unique_ptr<ts_model, ModelDeleter>;
using TracePtr = std::unique_ptr<ts_trace, TraceDeleter>;
using SummaryPtr = std::unique_ptr<ts_summary, SummaryDeleter>;
using StringPtr = std::unique_ptr<char, StringDeleter>;

// Files written so far; removed if the command fails.
class OutputSet {
 public:
  void Add(fs::path path) { paths_.push_back(std::move(path)); }
  void Commit() { paths_.clear(); }
  ~OutputSet() {
    std::error_code ec;
    for (const auto& p : paths_) fs::remove(p, ec);
  }

 private:
  std::vector<fs::path> paths_;
};

void WriteTextAtomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.close();
    if (!out) throw DataError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw DataError("cannot rename into " + path.string());
  }
}

json LoadConfigFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read config file " + path);
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw UsageError("config file " + path + " must hold a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
}

void RejectUnknownKeys(const json& config, const std::vector<std::string>& known) {
  for (const auto& [key, value] : config.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
}

template <typename T>
void Override(const json& config, const char* key, T& target) {
  if (!config.contains(key)) return;
  try {
    target = config.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("config key '") + key + "': " + e.what());
  }
}

std::vector<int32_t> ParseTokenList(const std::string& text) {
  std::string spaced = text;
  for (char& c : spaced) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(spaced);
  std::vector<int32_t> ids;
  std::string tok;
  while (in >> tok) {
    try {
      size_t used = 0;
      long v = std::stol(tok, &used);
      if (used != tok.size() || v < 0 || v > INT32_MAX) throw std::invalid_argument(tok);
      ids.push_back(static_cast<int32_t>(v));
    } catch (const std::exception&) {
      throw UsageError("bad token id '" + tok + "' in prompt '" + text + "'");
    }
  }
  if (ids.empty()) throw UsageError("empty prompt");
  return ids;
}

// Common options.
struct Common {
  std::string config_path;
  std::string out = ".";
  json file_config = json::object();
};

fs::path ResolveOut(const Common& common, const json& file_config) {
  std::string out = common.out;
  Override(file_config, "out", out);
  if (const char* env = std::getenv("TRACESCOPE_OUT"); env != nullptr && *env != '\0') {
    out = env;
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory " + out + ": " + ec.message());
  return fs::path(out);
}

// ---- trace ----------------------------------------------------------------

struct TraceArgs {
  std::vector<uint64_t> seeds{1};
  int32_t layers = 4;
  int32_t heads = 4;
  int32_t d_model = 32;
  int32_t vocab = 64;
  int32_t mlp_mult = 4;
  int32_t bytes_per_element = 4;
  int64_t max_steps = 1000;
  bool no_attention = false;
  bool no_hidden = false;
  std::vector<std::string> prompts;
  std::vector<int32_t> stop_ids;
};

int RunTrace(const Common& common, TraceArgs args) {
  const json& file = common.file_config;
  RejectUnknownKeys(file, {"out", "seeds", "layers", "heads", "d_model", "vocab",
                           "mlp_mult", "bytes_per_element", "max_steps",
                           "capture_attention", "capture_hidden", "prompts", "stop_ids"});
  Override(file, "seeds", args.seeds);
  Override(file, "layers", args.layers);
  Override(file, "heads", args.heads);
  Override(file, "d_model", args.d_model);
  Override(file, "vocab", args.vocab);
  Override(file, "mlp_mult", args.mlp_mult);
  Override(file, "bytes_per_element", args.bytes_per_element);
  Override(file, "max_steps", args.max_steps);
  Override(file, "stop_ids", args.stop_ids);
  bool capture_attention = !args.no_attention;
  bool capture_hidden = !args.no_hidden;
  Override(file, "capture_attention", capture_attention);
  Override(file, "capture_hidden", capture_hidden);

  std::vector<std::vector<int32_t>> prompts;
  if (file.contains("prompts")) {
    Override(file, "prompts", prompts);
  } else {
    for (const auto& p : args.prompts) prompts.push_back(ParseTokenList(p));
  }
  if (prompts.empty()) {
    std::vector<int32_t> p;
    for (int32_t i = 1; i <= 8; ++i) p.push_back(i % std::max(args.vocab, 1));
    prompts.push_back(p);
  }
  if (args.seeds.empty()) throw UsageError("at least one seed is required");

  const fs::path out_dir = ResolveOut(common, file);

  ts_decode_options options;
  ts_decode_options_init(&options);
  options.max_steps = args.max_steps;
  options.capture_attention = capture_attention ? 1 : 0;
  options.capture_hidden = capture_hidden ? 1 : 0;
  options.stop_ids = args.stop_ids.data();
  options.num_stop_ids = args.stop_ids.size();

  OutputSet outputs;
  ts_summary* raw_summary = nullptr;
  Check(ts_summary_create(&raw_summary), "summary");
  SummaryPtr summary(raw_summary);

  json echo = json::object();
  echo["command"] = "trace";
  echo["seeds"] = args.seeds;
  echo["layers"] = args.layers;
  echo["heads"] = args.heads;
  echo["d_model"] = args.d_model;
  echo["vocab"] = args.vocab;
  echo["mlp_mult"] = args.mlp_mult;
  echo["bytes_per_element"] = args.bytes_per_element;
  echo["max_steps"] = args.max_steps;
  echo["capture_attention"] = capture_attention;
  echo["capture_hidden"] = capture_hidden;
  echo["log_base"] = "e";
  echo["prompts"] = prompts;
  echo["stop_ids"] = args.stop_ids;
  if (!common.config_path.empty()) echo["config_file"] = file;

  for (uint64_t seed : args.seeds) {
    ts_model_config config;
    ts_model_config_init(&config);
    config.vocab_size = args.vocab;
    config.num_layers = args.layers;
    config.num_heads = args.heads;
    config.d_model = args.d_model;
    config.mlp_mult = args.mlp_mult;
    config.bytes_per_element = args.bytes_per_element;
    config.seed = seed;
    ts_model* raw_model = nullptr;
    Check(ts_model_create(&config, &raw_model), "model config");
    ModelPtr model(raw_model);
    const std::string model_id = ts_model_id(model.get());

    for (size_t i = 0; i < prompts.size(); ++i) {
      const std::string prompt_id = "p" + std::to_string(i);
      ts_trace* raw_trace = nullptr;
      Check(ts_decode_trace(model.get(), prompt_id.c_str(), prompts[i].data(),
                            prompts[i].size(), &options, &raw_trace),
            "decode " + model_id + " " + prompt_id);
      TracePtr trace(raw_trace);
      const std::string name = "trace_" + model_id + "_" + prompt_id + ".csv";
      const fs::path path = out_dir / name;
      outputs.Add(path);
      Check(ts_trace_write_file(trace.get(), path.c_str(), nullptr), path.string());
      Check(ts_summary_add(summary.get(), trace.get(), prompts[i].data(),
                           prompts[i].size(), name.c_str(), &options),
            "summary");
    }
  }

  const fs::path summary_path = out_dir / "summary.csv";
  outputs.Add(summary_path);
  Check(ts_summary_write_file(summary.get(), summary_path.c_str(), nullptr),
        summary_path.string());
  const fs::path config_path = out_dir / "run_config.json";
  outputs.Add(config_path);
  WriteTextAtomic(config_path, echo.dump(2) + "\n");
  outputs.Commit();
  std::cerr << "wrote " << ts_summary_record_count(summary.get()) << " trace(s) to "
            << out_dir.string() << "\n";
  return kExitOk;
}

// ---- analyze / compare ----------------------------------------------------

struct ReportArgs {
  std::vector<std::string> traces;
  std::string sections = "all";
  double fraction = 0.2;
  double tau = 0.1;
  int32_t extremal_k = 5;
  std::string correlation = "step";
};

int RunReport(const Common& common, ReportArgs args, ts_report_kind kind) {
  const json& file = common.file_config;
  RejectUnknownKeys(file, {"out", "traces", "sections", "fraction", "tau",
                           "extremal_k", "correlation"});
  Override(file, "traces", args.traces);
  Override(file, "sections", args.sections);
  Override(file, "fraction", args.fraction);
  Override(file, "tau", args.tau);
  Override(file, "extremal_k", args.extremal_k);
  Override(file, "correlation", args.correlation);

  const bool compare = kind == TS_REPORT_COMPARE;
  if (args.traces.empty()) throw UsageError("no trace files given");
  if (compare && args.traces.size() < 2) {
    throw UsageError("compare needs at least 2 trace files");
  }
  if (args.correlation != "step" && args.correlation != "model") {
    throw UsageError("--correlation must be 'step' or 'model'");
  }

  ts_report_options options;
  ts_report_options_init(&options);
  Check(ts_parse_sections(args.sections.c_str(), &options.sections), "--sections");
  options.fraction = args.fraction;
  options.tau = args.tau;
  options.extremal_k = args.extremal_k;
  options.per_model_correlation = args.correlation == "model" ? 1 : 0;

  std::vector<TracePtr> owned;
  std::vector<const ts_trace*> traces;
  for (const auto& path : args.traces) {
    ts_trace* raw = nullptr;
    Check(ts_trace_read_file(path.c_str(), &raw), path);
    owned.emplace_back(raw);
    traces.push_back(raw);
  }

  char* raw_text = nullptr;
  char* raw_kv = nullptr;
  Check(ts_render_report(traces.data(), traces.size(), kind, &options, &raw_text, &raw_kv),
        compare ? "compare" : "analyze");
  StringPtr text(raw_text);
  StringPtr kv(raw_kv);

  const fs::path out_dir = ResolveOut(common, file);
  const std::string stem = compare ? "compare" : "report";
  OutputSet outputs;
  outputs.Add(out_dir / (stem + ".txt"));
  WriteTextAtomic(out_dir / (stem + ".txt"), text.get());
  outputs.Add(out_dir / (stem + ".kv"));
  WriteTextAtomic(out_dir / (stem + ".kv"), kv.get());
  if (!common.config_path.empty()) {
    outputs.Add(out_dir / (stem + "_config.json"));
    WriteTextAtomic(out_dir / (stem + "_config.json"), file.dump(2) + "\n");
  }
  outputs.Commit();
  std::cout << text.get();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-level structural signals of small decoders"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ts_version()));

  Common common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON config file; wins over flags");
    sub->add_option("--out", common.out, "Output directory (TRACESCOPE_OUT overrides)");
  };

  TraceArgs trace_args;
  auto* trace = app.add_subcommand("trace", "Decode toy models and write traces");
  add_common(trace);
  trace->add_option("--seed", trace_args.seeds, "Model seed (repeatable)");
  trace->add_option("--layers", trace_args.layers)->check(CLI::PositiveNumber);
  trace->add_option("--heads", trace_args.heads)->check(CLI::PositiveNumber);
  trace->add_option("--dmodel", trace_args.d_model)->check(CLI::PositiveNumber);
  trace->add_option("--vocab", trace_args.vocab)->check(CLI::PositiveNumber);
  trace->add_option("--mlp-mult", trace_args.mlp_mult)->check(CLI::PositiveNumber);
  trace->add_option("--bytes-per-element", trace_args.bytes_per_element)
      ->check(CLI::IsMember({2, 4}));
  trace->add_option("--max-steps", trace_args.max_steps, "Generation step cap")
      ->check(CLI::PositiveNumber);
  trace->add_flag("--no-attention", trace_args.no_attention);
  trace->add_flag("--no-hidden", trace_args.no_hidden);
  trace->add_option("--prompt", trace_args.prompts, "Prompt token ids, e.g. 1,2,3 (repeatable)");
  trace->add_option("--stop", trace_args.stop_ids, "Stop token id (repeatable)");

  ReportArgs analyze_args;
  auto* analyze = app.add_subcommand("analyze", "Report statistics over traces");
  add_common(analyze);
  ReportArgs compare_args;
  auto* compare = app.add_subcommand("compare", "Side-by-side comparison of traces");
  add_common(compare);
  for (auto [sub, args] : {std::pair{analyze, &analyze_args}, std::pair{compare, &compare_args}}) {
    sub->add_option("traces", args->traces, "Trace CSV files");
    sub->add_option("--sections", args->sections, "Comma list or 'all'");
    sub->add_option("--fraction", args->fraction, "Drift window fraction");
    sub->add_option("--tau", args->tau, "Regime threshold");
    sub->add_option("--extremal-k", args->extremal_k)->check(CLI::PositiveNumber);
    sub->add_option("--correlation", args->correlation, "step or model");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!common.config_path.empty()) common.file_config = LoadConfigFile(common.config_path);
    if (trace->parsed()) return RunTrace(common, trace_args);
    if (analyze->parsed()) return RunReport(common, analyze_args, TS_REPORT_ANALYZE);
    return RunReport(common, compare_args, TS_REPORT_COMPARE);
  } catch (const UsageError& e) {
    std::cerr << "tracescope: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "tracescope: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "tracescope: " << e.what() << "\n";
    return kExitData;
  }
}
