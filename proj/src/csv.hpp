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

// Minimal RFC 4180-style CSV: comma separator, double-quote quoting, LF
// record terminator. Fields containing a comma, quote, CR or LF are quoted.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tracescope::csv {

struct Record {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

void AppendField(std::string& out, std::string_view field);

// Trailing empty lines are accepted; an empty line elsewhere is an error.
std::vector<Record> Parse(std::string_view text);

// Shortest decimal that round-trips to the same double.
std::string FormatDouble(double value);
// Strict parse of the whole field; rejects inf/nan and trailing junk.
std::optional<double> ParseDouble(std::string_view text);
std::optional<std::int64_t> ParseInt(std::string_view text);

}  // namespace tracescope::csv
