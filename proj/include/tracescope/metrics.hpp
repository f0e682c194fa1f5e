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

// Per-step and per-layer structural measurements of a decoding process.
//
// Every function here is pure and computes in double precision; callers
// upcast reduced-precision model outputs before handing them in. Entropies
// are in nats and follow the 0 * log(0) = 0 convention.

#include <cstdint>
#include <span>
#include <vector>

namespace tracescope::metrics {

// Sum tolerance accepted without touching the values.
inline constexpr double kProbabilitySumTolerance = 1e-9;
// Deviations up to this are renormalized away; anything larger is rejected.
inline constexpr double kRenormalizeTolerance = 1e-6;

// A normalized distribution over a finite support (vocabulary or key
// positions). Immutable once built.
class ProbabilityVector {
 public:
  // Validates entries (finite, non-negative, non-empty) and the sum. A sum
  // off by more than kRenormalizeTolerance throws kInvalidArgument.
  static ProbabilityVector FromValues(std::vector<double> values);

  std::span<const double> values() const { return values_; }
  std::size_t support_size() const { return values_.size(); }

 private:
  explicit ProbabilityVector(std::vector<double> values)
      : values_(std::move(values)) {}

  std::vector<double> values_;
};

// Attention weights of the last query position: one row per head, each a
// distribution over the current key positions.
class AttentionSlice {
 public:
  // `weights` is row-major [num_heads x key_len].
  static AttentionSlice FromRowMajor(std::span<const double> weights,
                                     std::size_t num_heads,
                                     std::size_t key_len);

  std::span<const ProbabilityVector> heads() const { return heads_; }
  std::size_t num_heads() const { return heads_.size(); }
  std::size_t key_len() const { return key_len_; }

 private:
  AttentionSlice(std::vector<ProbabilityVector> heads, std::size_t key_len)
      : heads_(std::move(heads)), key_len_(key_len) {}

  std::vector<ProbabilityVector> heads_;
  std::size_t key_len_ = 0;
};

// Last-token hidden state of one layer (0 = embedding output).
class HiddenVector {
 public:
  HiddenVector(std::vector<double> components, int layer_index);

  std::span<const double> components() const { return components_; }
  int layer_index() const { return layer_index_; }
  std::size_t dim() const { return components_.size(); }

 private:
  std::vector<double> components_;
  int layer_index_ = 0;
};

struct KvShape {
  std::int64_t num_layers = 0;
  std::int64_t num_heads = 0;
  std::int64_t head_dim = 0;
  std::int64_t seq_len = 0;
  std::int64_t bytes_per_element = 0;  // 2 for half, 4 for single precision
};

struct KvBytes {
  std::int64_t per_layer = 0;
  std::int64_t total = 0;
};

// Max-subtracted softmax. Throws on empty or non-finite input.
ProbabilityVector Softmax(std::span<const double> logits);

double ShannonEntropy(const ProbabilityVector& p);
double Top1Prob(const ProbabilityVector& p);
// Largest minus second-largest entry. Needs support_size >= 2.
double Top1Top2Gap(const ProbabilityVector& p);

std::vector<double> AttentionEntropyPerHead(const AttentionSlice& slice);
// Mean over heads.
double LayerAttentionEntropy(std::span<const double> head_entropies);
// Head Dispersion Index: population standard deviation of the per-head
// attention entropies of one layer. Zero iff every head has the same entropy.
double HeadDispersionIndex(std::span<const double> head_entropies);

double HiddenL2(const HiddenVector& h);
// ||a - b||_2; throws on dimension mismatch.
double DeltaL2(const HiddenVector& a, const HiddenVector& b);

// Key and value bytes for a dense cache. Throws kInvalidArgument on
// non-positive fields or when the products overflow int64.
KvBytes ComputeKvBytes(const KvShape& shape);

}  // namespace tracescope::metrics
