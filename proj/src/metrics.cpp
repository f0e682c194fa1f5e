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

#include "tracescope/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/core.h>

#include "tracescope/error.hpp"

namespace tracescope::metrics {
namespace {

// Shifted by the first value so identical inputs give exactly 0.
double PopulationSd(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  const double shift = values.front();
  double sum = 0.0;
  for (double v : values) sum += v - shift;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - shift - mean) * (v - shift - mean);
  return std::sqrt(ss / n);
}

std::int64_t CheckedMul(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    Fail(ErrorCode::kInvalidArgument, "kv byte count overflows int64");
  }
  return out;
}

}  // namespace

ProbabilityVector ProbabilityVector::FromValues(std::vector<double> values) {
  if (values.empty()) {
    Fail(ErrorCode::kInvalidArgument, "probability vector must be non-empty");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v) || v < 0.0) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("probability entry {} is invalid ({})", i, v));
    }
    sum += v;
  }
  const double deviation = std::abs(sum - 1.0);
  if (deviation > kRenormalizeTolerance) {
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("probabilities sum to {}, not 1", sum));
  }
  if (deviation > kProbabilitySumTolerance) {
    for (double& v : values) v /= sum;
  }
  return ProbabilityVector(std::move(values));
}

AttentionSlice AttentionSlice::FromRowMajor(std::span<const double> weights,
                                            std::size_t num_heads,
                                            std::size_t key_len) {
  if (num_heads == 0 || key_len == 0 || weights.size() != num_heads * key_len) {
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("attention slice of {} weights does not match {} heads x "
                     "{} keys",
                     weights.size(), num_heads, key_len));
  }
  std::vector<ProbabilityVector> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    auto row = weights.subspan(h * key_len, key_len);
    heads.push_back(
        ProbabilityVector::FromValues(std::vector<double>(row.begin(), row.end())));
  }
  return AttentionSlice(std::move(heads), key_len);
}

HiddenVector::HiddenVector(std::vector<double> components, int layer_index)
    : components_(std::move(components)), layer_index_(layer_index) {
  if (layer_index < 0) {
    Fail(ErrorCode::kInvalidArgument, "hidden layer index must be >= 0");
  }
  for (double c : components_) {
    if (!std::isfinite(c)) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("non-finite hidden component at layer {}", layer_index));
    }
  }
}

ProbabilityVector Softmax(std::span<const double> logits) {
  if (logits.empty()) {
    Fail(ErrorCode::kInvalidArgument, "softmax of empty logits");
  }
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double x : logits) {
    if (!std::isfinite(x)) {
      Fail(ErrorCode::kInvalidArgument, "softmax of non-finite logit");
    }
    max_logit = std::max(max_logit, x);
  }
  std::vector<double> probs(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return ProbabilityVector::FromValues(std::move(probs));
}

double ShannonEntropy(const ProbabilityVector& p) {
  double h = 0.0;
  for (double v : p.values()) {
    if (v > 0.0) h -= v * std::log(v);
  }
  const double upper = std::log(static_cast<double>(p.support_size()));
  return std::clamp(h, 0.0, upper);
}

double Top1Prob(const ProbabilityVector& p) {
  return *std::max_element(p.values().begin(), p.values().end());
}

double Top1Top2Gap(const ProbabilityVector& p) {
  if (p.support_size() < 2) {
    Fail(ErrorCode::kInvalidArgument, "top1-top2 gap needs at least 2 entries");
  }
  double first = -1.0;
  double second = -1.0;
  for (double v : p.values()) {
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return first - second;
}

std::vector<double> AttentionEntropyPerHead(const AttentionSlice& slice) {
  std::vector<double> out;
  out.reserve(slice.num_heads());
  for (const auto& head : slice.heads()) out.push_back(ShannonEntropy(head));
  return out;
}

double LayerAttentionEntropy(std::span<const double> head_entropies) {
  if (head_entropies.empty()) {
    Fail(ErrorCode::kInvalidArgument, "layer attention entropy of zero heads");
  }
  return std::accumulate(head_entropies.begin(), head_entropies.end(), 0.0) /
         static_cast<double>(head_entropies.size());
}

double HeadDispersionIndex(std::span<const double> head_entropies) {
  if (head_entropies.empty()) {
    Fail(ErrorCode::kInvalidArgument, "head dispersion of zero heads");
  }
  return PopulationSd(head_entropies);
}

double HiddenL2(const HiddenVector& h) {
  double ss = 0.0;
  for (double c : h.components()) ss += c * c;
  return std::sqrt(ss);
}

double DeltaL2(const HiddenVector& a, const HiddenVector& b) {
  if (a.dim() != b.dim()) {
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("hidden dimension mismatch: {} vs {}", a.dim(), b.dim()));
  }
  double ss = 0.0;
  auto ac = a.components();
  auto bc = b.components();
  for (std::size_t i = 0; i < ac.size(); ++i) {
    const double d = ac[i] - bc[i];
    ss += d * d;
  }
  return std::sqrt(ss);
}

KvBytes ComputeKvBytes(const KvShape& shape) {
  if (shape.num_layers <= 0 || shape.num_heads <= 0 || shape.head_dim <= 0 ||
      shape.seq_len <= 0 || shape.bytes_per_element <= 0) {
    Fail(ErrorCode::kInvalidArgument, "kv shape fields must be positive");
  }
  // Factor 2: one key tensor and one value tensor per layer.
  std::int64_t per_layer = CheckedMul(2, shape.num_heads);
  per_layer = CheckedMul(per_layer, shape.head_dim);
  per_layer = CheckedMul(per_layer, shape.seq_len);
  per_layer = CheckedMul(per_layer, shape.bytes_per_element);
  return {per_layer, CheckedMul(per_layer, shape.num_layers)};
}

}  // namespace tracescope::metrics
