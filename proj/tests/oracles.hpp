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

// Independent reference computations in extended precision, written without
// reusing any library code.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace tracescope::testing {

inline long double OracleEntropy(const std::vector<double>& p) {
  long double h = 0.0L;
  for (double x : p) {
    if (x > 0.0) h -= static_cast<long double>(x) * std::log(static_cast<long double>(x));
  }
  return h;
}

inline std::vector<long double> OracleSoftmax(const std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  long double sum = 0.0L;
  std::vector<long double> e(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    e[i] = std::exp(static_cast<long double>(z[i]) - mx);
    sum += e[i];
  }
  for (auto& x : e) x /= sum;
  return e;
}

inline long double OracleEntropyFromLogits(const std::vector<double>& z) {
  long double h = 0.0L;
  for (long double p : OracleSoftmax(z)) {
    if (p > 0.0L) h -= p * std::log(p);
  }
  return h;
}

inline double OracleMean(const std::vector<double>& v) {
  long double s = 0.0L;
  for (double x : v) s += x;
  return static_cast<double>(s / static_cast<long double>(v.size()));
}

inline double OracleSd(const std::vector<double>& v) {
  const long double m = OracleMean(v);
  long double ss = 0.0L;
  for (double x : v) ss += (x - m) * (x - m);
  return static_cast<double>(std::sqrt(ss / static_cast<long double>(v.size())));
}

// Sort, then interpolate between closest ranks at position q * (n - 1).
inline double OraclePercentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const long double pos = static_cast<long double>(q) * static_cast<long double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const long double frac = pos - static_cast<long double>(lo);
  return static_cast<double>(v[lo] + frac * (static_cast<long double>(v[hi]) - v[lo]));
}

inline double OraclePearson(const std::vector<double>& x, const std::vector<double>& y) {
  const long double mx = OracleMean(x), my = OracleMean(y);
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

using Confusion = std::vector<std::vector<double>>;

// Percent agreement and Cohen's kappa from a square confusion matrix.
inline void OracleAgreement(const Confusion& m, double* po_out, double* kappa_out) {
  long double total = 0, diag = 0;
  std::vector<long double> rows(m.size(), 0), cols(m.size(), 0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      total += m[i][j];
      rows[i] += m[i][j];
      cols[j] += m[i][j];
      if (i == j) diag += m[i][j];
    }
  }
  const long double po = diag / total;
  long double pe = 0;
  for (std::size_t i = 0; i < m.size(); ++i) pe += rows[i] * cols[i] / (total * total);
  *po_out = static_cast<double>(po);
  *kappa_out = static_cast<double>((po - pe) / (1 - pe));
}

// Expands a confusion matrix into paired rater labels.
inline void LabelsFromConfusion(const Confusion& m, std::vector<std::string>& a,
                                std::vector<std::string>& b) {
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = 0; j < m.size(); ++j) {
      for (int c = 0; c < static_cast<int>(m[i][j]); ++c) {
        a.push_back("c" + std::to_string(i));
        b.push_back("c" + std::to_string(j));
      }
    }
  }
}

}  // namespace tracescope::testing
