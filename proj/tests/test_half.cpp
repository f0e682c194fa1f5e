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

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>

#include <doctest.h>

#include "half.hpp"

using tracescope::detail::FloatToHalf;
using tracescope::detail::HalfToFloat;

namespace {

// Decodes binary16 from its bit fields.
double OracleHalf(std::uint16_t bits) {
  const int sign = bits >> 15;
  const int exponent = (bits >> 10) & 0x1f;
  const int mantissa = bits & 0x3ff;
  double value;
  if (exponent == 0) {
    value = std::ldexp(mantissa, -24);
  } else if (exponent == 31) {
    value = mantissa ? std::numeric_limits<double>::quiet_NaN()
                     : std::numeric_limits<double>::infinity();
  } else {
    value = std::ldexp(1024 + mantissa, exponent - 25);
  }
  return sign ? -value : value;
}

}  // namespace

TEST_CASE("every finite half decodes and re-encodes to itself") {
  for (std::uint32_t bits = 0; bits < 0x10000; ++bits) {
    const auto h = static_cast<std::uint16_t>(bits);
    const float f = HalfToFloat(h);
    const double expected = OracleHalf(h);
    if (std::isnan(expected)) {
      CHECK(std::isnan(f));
      continue;
    }
    REQUIRE(static_cast<double>(f) == expected);
    REQUIRE(FloatToHalf(f) == h);
  }
}

TEST_CASE("rounding to nearest, ties to even") {
  CHECK(HalfToFloat(FloatToHalf(1.0f)) == 1.0f);
  // 1 + 2^-11 is halfway between 1 and 1 + 2^-10: ties to the even mantissa.
  CHECK(HalfToFloat(FloatToHalf(1.0f + std::ldexp(1.0f, -11))) == 1.0f);
  const float odd = 1.0f + std::ldexp(1.0f, -10);
  CHECK(HalfToFloat(FloatToHalf(odd + std::ldexp(1.0f, -11))) == 1.0f + std::ldexp(1.0f, -9));
  CHECK(HalfToFloat(FloatToHalf(65504.0f)) == 65504.0f);
  CHECK(std::isinf(HalfToFloat(FloatToHalf(70000.0f))));
  CHECK(HalfToFloat(FloatToHalf(std::ldexp(1.0f, -26))) == 0.0f);
  CHECK(HalfToFloat(FloatToHalf(std::ldexp(1.0f, -24))) == std::ldexp(1.0f, -24));
  CHECK(std::signbit(HalfToFloat(FloatToHalf(-0.0f))));
}

TEST_CASE("conversion error is within half an ulp") {
  for (int i = -2000; i <= 2000; ++i) {
    const float x = static_cast<float>(i) * 0.0137f;
    const float y = HalfToFloat(FloatToHalf(x));
    const float ulp = std::abs(x) < std::ldexp(1.0f, -14)
                          ? std::ldexp(1.0f, -24)
                          : std::ldexp(1.0f, std::ilogb(x) - 10);
    CHECK(std::abs(y - x) <= 0.5f * ulp);
  }
}
