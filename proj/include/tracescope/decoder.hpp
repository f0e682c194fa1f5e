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

// A small, fully observable autoregressive decoder with seeded weights.
//
// Architecture: learned token + absolute position embeddings, L pre-norm
// residual blocks (RMSNorm -> multi-head causal attention -> add, RMSNorm ->
// SiLU MLP -> add), final RMSNorm and an untied output projection. All
// arithmetic is double precision. Keys and values are rounded to the
// configured storage precision (binary16 or binary32) when they enter the
// cache, which is also what the byte accounting measures.

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "tracescope/metrics.hpp"
#include "tracescope/trace.hpp"

namespace tracescope::decoder {

using TokenId = std::int32_t;

struct ModelConfig {
  int vocab_size = 64;
  int num_layers = 4;
  int num_heads = 4;
  int d_model = 32;
  int mlp_mult = 4;
  std::uint64_t seed = 1;
  int bytes_per_element = 4;  // KV storage: 2 = binary16, 4 = binary32
  int max_positions = 2048;

  int head_dim() const { return num_heads > 0 ? d_model / num_heads : 0; }
  // Throws Error(kInvalidArgument) describing the first bad field.
  void Validate() const;
};

// Row-major [rows x cols] matrices stored flat.
struct BlockWeights {
  std::vector<double> attn_norm;  // [d]
  std::vector<double> wq, wk, wv, wo;  // [d x d]
  std::vector<double> mlp_norm;   // [d]
  std::vector<double> w_in;       // [mlp_mult*d x d]
  std::vector<double> w_out;      // [d x mlp_mult*d]
};

struct Weights {
  std::vector<double> token_embedding;     // [V x d]
  std::vector<double> position_embedding;  // [max_positions x d]
  std::vector<BlockWeights> blocks;
  std::vector<double> final_norm;          // [d]
  std::vector<double> output;              // [V x d]
};

// Counter-based SplitMix64 stream: the value for element `index` of tensor
// `tensor` depends only on (seed, tensor, index), so weights are identical on
// every platform and independent of traversal bookkeeping.
std::uint64_t WeightBits(std::uint64_t seed, std::uint64_t tensor,
                         std::uint64_t index);
// Uniform in [-1, 1) from the top 53 bits.
double WeightUniform(std::uint64_t seed, std::uint64_t tensor,
                     std::uint64_t index);

class Model {
 public:
  explicit Model(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const Weights& weights() const { return weights_; }
  // For rigging test models (e.g. constant logits); not used by decoding.
  Weights& mutable_weights() { return weights_; }

  // e.g. "toy-v64-l4-h4-d32-s1"
  std::string id() const;

 private:
  ModelConfig config_;
  Weights weights_;
};

// One tensor (keys or values) of one layer, stored at cache precision.
class KvBuffer {
 public:
  explicit KvBuffer(int bytes_per_element = 4);

  void Append(std::span<const double> values);
  double At(std::size_t index) const;
  std::size_t size() const;
  std::int64_t bytes() const;

 private:
  int bytes_per_element_;
  std::vector<std::uint16_t> half_;
  std::vector<float> single_;
};

class KvCache {
 public:
  KvCache() = default;
  KvCache(int num_layers, int d_model, int bytes_per_element);

  void Append(int layer, std::span<const double> key,
              std::span<const double> value);
  // Key/value component `c` at `position` as stored (already rounded).
  double Key(int layer, std::size_t position, std::size_t c) const;
  double Value(int layer, std::size_t position, std::size_t c) const;

  int num_layers() const { return static_cast<int>(keys_.size()); }
  std::size_t seq_len() const { return seq_len_; }
  // Measured from the live buffers.
  std::int64_t LayerBytes(int layer) const;
  std::int64_t TotalBytes() const;

  // Marks one more position complete once every layer has appended it.
  void CommitPosition() { ++seq_len_; }

 private:
  int d_model_ = 0;
  std::size_t seq_len_ = 0;
  std::vector<KvBuffer> keys_;
  std::vector<KvBuffer> values_;
};

struct StepOutputs {
  std::vector<double> logits;                       // [V]
  std::vector<metrics::HiddenVector> hidden_per_layer;  // L + 1 entries
  std::vector<metrics::AttentionSlice> attention_per_layer;  // L, if captured
  metrics::KvShape kv_shape;
  std::vector<std::int64_t> kv_layer_bytes;  // measured, per block
  std::int64_t kv_total_bytes = 0;           // measured
};

struct FullForward {
  StepOutputs last;
  KvCache cache;
  // Per layer, row-major [H x T x T] softmax weights for every query
  // position; filled only when requested.
  std::vector<std::vector<double>> attention_matrices;
};

// Whole-sequence forward pass with an explicit causal mask. Returns outputs
// for the last position and the cache built from all positions.
FullForward ForwardFull(const Model& model, std::span<const TokenId> tokens,
                        bool capture_attention,
                        bool capture_attention_matrices = false);

enum class StopReason { kNone, kStopToken, kMaxSteps, kRepetition };

std::string_view StopReasonName(StopReason reason);

inline constexpr std::size_t kRepetitionWindow = 15;

// Mutable state of one greedy generation. Single owner; not thread-safe.
class DecodeSession {
 public:
  DecodeSession() = default;
  DecodeSession(std::unordered_set<TokenId> stop_set, std::int64_t max_steps);

  bool initialized() const { return initialized_; }
  // Every token fed to the model, in cache order.
  std::span<const TokenId> positions() const { return positions_; }
  const KvCache& cache() const { return cache_; }
  std::int64_t step() const { return step_; }
  const std::deque<TokenId>& recent_tokens() const { return recent_; }
  std::span<const TokenId> generated() const { return generated_; }
  const std::unordered_set<TokenId>& stop_set() const { return stop_set_; }
  std::int64_t max_steps() const { return max_steps_; }

  // Records a newly selected token: bumps step, appends to the generated
  // list and the repetition window.
  void RecordGenerated(TokenId token);
  // True when the last kRepetitionWindow generated tokens are identical.
  bool RepetitionDetected() const;

 private:
  friend StepOutputs Prefill(const Model&, DecodeSession&,
                             std::span<const TokenId>, bool);
  friend StepOutputs ForwardIncremental(const Model&, DecodeSession&, TokenId,
                                        bool);

  bool initialized_ = false;
  std::vector<TokenId> positions_;
  KvCache cache_;
  std::int64_t step_ = 0;
  std::deque<TokenId> recent_;
  std::vector<TokenId> generated_;
  std::unordered_set<TokenId> stop_set_;
  std::int64_t max_steps_ = 1000;
};

// Prompt phase: ForwardFull over `prompt`, seeding the session's cache.
StepOutputs Prefill(const Model& model, DecodeSession& session,
                    std::span<const TokenId> prompt, bool capture_attention);

// Processes exactly one token against the cached keys/values and extends
// the cache by one position. Throws if the session was never prefilled.
StepOutputs ForwardIncremental(const Model& model, DecodeSession& session,
                               TokenId new_token, bool capture_attention);

// Index of the largest logit; ties go to the lowest id.
TokenId ArgmaxLowestId(std::span<const double> logits);

using StepObserver =
    std::function<void(trace::Phase, std::int64_t step, const StepOutputs&)>;

struct DecodeOptions {
  std::string prompt_id = "p0";
  std::vector<TokenId> stop_tokens;
  std::int64_t max_steps = 1000;
  bool capture_attention = true;
  bool capture_hidden = true;
  StepObserver observer;  // optional, sees every forward pass
};

struct DecodeResult {
  std::vector<TokenId> generated_ids;  // excludes prompt, includes terminator
  std::vector<trace::TraceRow> rows;
  StopReason stop_reason = StopReason::kNone;
};

// Greedy decoding with trace extraction. The prompt forward is step 0; each
// generation step re-feeds the most recent token with the cache, takes the
// argmax of the resulting logits, records metrics, then checks the
// repetition guard followed by the stop-token / step-cap rule.
DecodeResult GreedyDecodeTrace(const Model& model,
                               std::span<const TokenId> prompt,
                               const DecodeOptions& options);

// Builds the rows of one step from its forward outputs. `previous` is the
// prior GEN step's outputs (for step-to-step drift) or nullptr.
void AppendStepRows(std::vector<trace::TraceRow>& rows,
                    const std::string& model_id, const std::string& prompt_id,
                    trace::Phase phase, std::int64_t step,
                    std::optional<TokenId> token, const StepOutputs& outputs,
                    const StepOutputs* previous, bool capture_attention,
                    bool capture_hidden);

}  // namespace tracescope::decoder
