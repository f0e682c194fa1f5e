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

#include "tracescope/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/core.h>

#include "half.hpp"
#include "tracescope/error.hpp"

namespace tracescope::decoder {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
constexpr double kNormEps = 1e-6;

std::uint64_t Mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Tensor traversal order; the enum value is the stream id.
enum Tensor : std::uint64_t {
  kTokenEmbedding = 0,
  kPositionEmbedding = 1,
  kFinalNorm = 2,
  kOutput = 3,
  kFirstBlockTensor = 16,  // block b, slot s -> 16 + 8*b + s
};

enum BlockSlot : std::uint64_t {
  kAttnNorm = 0, kWq, kWk, kWv, kWo, kMlpNorm, kWIn, kWOut,
};

std::vector<double> Fill(std::uint64_t seed, std::uint64_t tensor,
                         std::size_t count, double scale, double offset) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = offset + scale * WeightUniform(seed, tensor, i);
  }
  return out;
}

// y = W x for row-major W [rows x cols].
void MatVec(std::span<const double> w, std::span<const double> x,
            std::span<double> y) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < y.size(); ++r) {
    double acc = 0.0;
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

std::vector<double> RmsNorm(std::span<const double> x,
                            std::span<const double> gain) {
  double ss = 0.0;
  for (double v : x) ss += v * v;
  const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + kNormEps);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv * gain[i];
  return out;
}

double Silu(double x) { return x / (1.0 + std::exp(-x)); }

// x += W_out silu(W_in rmsnorm(x)).
void MlpResidual(const ModelConfig& cfg, const BlockWeights& block,
                 std::span<double> x) {
  const auto normed = RmsNorm(x, block.mlp_norm);
  std::vector<double> inner(static_cast<std::size_t>(cfg.mlp_mult * cfg.d_model));
  MatVec(block.w_in, normed, inner);
  for (double& v : inner) v = Silu(v);
  std::vector<double> out(x.size());
  MatVec(block.w_out, inner, out);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += out[i];
}

void Embed(const Model& model, TokenId token, std::size_t position,
           std::span<double> x) {
  const auto& cfg = model.config();
  if (token < 0 || token >= cfg.vocab_size) {
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("token id {} outside vocabulary [0, {})", token,
                     cfg.vocab_size));
  }
  if (position >= static_cast<std::size_t>(cfg.max_positions)) {
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("position {} exceeds max_positions {}", position,
                     cfg.max_positions));
  }
  const std::size_t d = static_cast<std::size_t>(cfg.d_model);
  const auto& w = model.weights();
  for (std::size_t i = 0; i < d; ++i) {
    x[i] = w.token_embedding[static_cast<std::size_t>(token) * d + i] +
           w.position_embedding[position * d + i];
  }
}

std::vector<double> Logits(const Model& model, std::span<const double> x) {
  const auto& w = model.weights();
  const auto normed = RmsNorm(x, w.final_norm);
  std::vector<double> logits(static_cast<std::size_t>(model.config().vocab_size));
  MatVec(w.output, normed, logits);
  return logits;
}

double StorageRound(double v, int bytes_per_element) {
  const float f = static_cast<float>(v);
  if (bytes_per_element == 2) return detail::HalfToFloat(detail::FloatToHalf(f));
  return f;
}

void FillKvAccounting(const Model& model, const KvCache& cache,
                      StepOutputs& out) {
  const auto& cfg = model.config();
  out.kv_shape = metrics::KvShape{cfg.num_layers, cfg.num_heads, cfg.head_dim(),
                                  static_cast<std::int64_t>(cache.seq_len()),
                                  cfg.bytes_per_element};
  out.kv_layer_bytes.clear();
  for (int l = 0; l < cache.num_layers(); ++l) {
    out.kv_layer_bytes.push_back(cache.LayerBytes(l));
  }
  out.kv_total_bytes = cache.TotalBytes();
}

}  // namespace

void ModelConfig::Validate() const {
  auto bad = [](const std::string& what) {
    Fail(ErrorCode::kInvalidArgument, "invalid model config: " + what);
  };
  if (vocab_size < 4) bad("vocab_size must be >= 4");
  if (num_layers < 1) bad("num_layers must be >= 1");
  if (num_heads < 1) bad("num_heads must be >= 1");
  if (d_model < 1) bad("d_model must be >= 1");
  if (d_model % num_heads != 0) {
    bad(fmt::format("d_model {} is not divisible by num_heads {}", d_model,
                    num_heads));
  }
  if (mlp_mult < 1) bad("mlp_mult must be >= 1");
  if (bytes_per_element != 2 && bytes_per_element != 4) {
    bad("bytes_per_element must be 2 or 4");
  }
  if (max_positions < 2) bad("max_positions must be >= 2");
}

std::uint64_t WeightBits(std::uint64_t seed, std::uint64_t tensor,
                         std::uint64_t index) {
  const std::uint64_t stream = Mix64(seed + kGolden * (tensor + 1));
  return Mix64(stream + kGolden * (index + 1));
}

double WeightUniform(std::uint64_t seed, std::uint64_t tensor,
                     std::uint64_t index) {
  const double u =
      static_cast<double>(WeightBits(seed, tensor, index) >> 11) * 0x1.0p-53;
  return 2.0 * u - 1.0;
}

Model::Model(ModelConfig config) : config_(config) {
  config_.Validate();
  const std::uint64_t seed = config_.seed;
  const auto d = static_cast<std::size_t>(config_.d_model);
  const auto v = static_cast<std::size_t>(config_.vocab_size);
  const auto m = static_cast<std::size_t>(config_.mlp_mult) * d;
  const double proj = std::sqrt(3.0 / static_cast<double>(d));
  const double down = std::sqrt(3.0 / static_cast<double>(m));

  weights_.token_embedding = Fill(seed, kTokenEmbedding, v * d, 1.0, 0.0);
  weights_.position_embedding = Fill(
      seed, kPositionEmbedding,
      static_cast<std::size_t>(config_.max_positions) * d, 0.5, 0.0);
  for (int b = 0; b < config_.num_layers; ++b) {
    const std::uint64_t base = kFirstBlockTensor + 8 * static_cast<std::uint64_t>(b);
    BlockWeights block;
    block.attn_norm = Fill(seed, base + kAttnNorm, d, 0.1, 1.0);
    block.wq = Fill(seed, base + kWq, d * d, proj, 0.0);
    block.wk = Fill(seed, base + kWk, d * d, proj, 0.0);
    block.wv = Fill(seed, base + kWv, d * d, proj, 0.0);
    block.wo = Fill(seed, base + kWo, d * d, proj, 0.0);
    block.mlp_norm = Fill(seed, base + kMlpNorm, d, 0.1, 1.0);
    block.w_in = Fill(seed, base + kWIn, m * d, proj, 0.0);
    block.w_out = Fill(seed, base + kWOut, d * m, down, 0.0);
    weights_.blocks.push_back(std::move(block));
  }
  weights_.final_norm = Fill(seed, kFinalNorm, d, 0.1, 1.0);
  weights_.output = Fill(seed, kOutput, v * d, 4.0 * proj, 0.0);
}

std::string Model::id() const {
  return fmt::format("toy-v{}-l{}-h{}-d{}-s{}", config_.vocab_size,
                     config_.num_layers, config_.num_heads, config_.d_model,
                     config_.seed);
}

KvBuffer::KvBuffer(int bytes_per_element)
    : bytes_per_element_(bytes_per_element) {}

void KvBuffer::Append(std::span<const double> values) {
  for (double v : values) {
    if (bytes_per_element_ == 2) {
      half_.push_back(detail::FloatToHalf(static_cast<float>(v)));
    } else {
      single_.push_back(static_cast<float>(v));
    }
  }
}

double KvBuffer::At(std::size_t index) const {
  if (bytes_per_element_ == 2) return detail::HalfToFloat(half_[index]);
  return single_[index];
}

std::size_t KvBuffer::size() const {
  return bytes_per_element_ == 2 ? half_.size() : single_.size();
}

std::int64_t KvBuffer::bytes() const {
  return bytes_per_element_ == 2
             ? static_cast<std::int64_t>(half_.size() * sizeof(std::uint16_t))
             : static_cast<std::int64_t>(single_.size() * sizeof(float));
}

KvCache::KvCache(int num_layers, int d_model, int bytes_per_element)
    : d_model_(d_model),
      keys_(static_cast<std::size_t>(num_layers), KvBuffer(bytes_per_element)),
      values_(static_cast<std::size_t>(num_layers), KvBuffer(bytes_per_element)) {}

void KvCache::Append(int layer, std::span<const double> key,
                     std::span<const double> value) {
  keys_[static_cast<std::size_t>(layer)].Append(key);
  values_[static_cast<std::size_t>(layer)].Append(value);
}

double KvCache::Key(int layer, std::size_t position, std::size_t c) const {
  return keys_[static_cast<std::size_t>(layer)].At(
      position * static_cast<std::size_t>(d_model_) + c);
}

double KvCache::Value(int layer, std::size_t position, std::size_t c) const {
  return values_[static_cast<std::size_t>(layer)].At(
      position * static_cast<std::size_t>(d_model_) + c);
}

std::int64_t KvCache::LayerBytes(int layer) const {
  return keys_[static_cast<std::size_t>(layer)].bytes() +
         values_[static_cast<std::size_t>(layer)].bytes();
}

std::int64_t KvCache::TotalBytes() const {
  std::int64_t total = 0;
  for (int l = 0; l < num_layers(); ++l) total += LayerBytes(l);
  return total;
}

FullForward ForwardFull(const Model& model, std::span<const TokenId> tokens,
                        bool capture_attention,
                        bool capture_attention_matrices) {
  if (tokens.empty()) {
    Fail(ErrorCode::kInvalidArgument, "forward pass needs at least one token");
  }
  const auto& cfg = model.config();
  const auto& w = model.weights();
  const std::size_t t_len = tokens.size();
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto heads = static_cast<std::size_t>(cfg.num_heads);
  const auto hd = static_cast<std::size_t>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  FullForward result;
  result.cache = KvCache(cfg.num_layers, cfg.d_model, cfg.bytes_per_element);
  StepOutputs& out = result.last;

  // x: [T x d]
  std::vector<double> x(t_len * d);
  for (std::size_t t = 0; t < t_len; ++t) {
    Embed(model, tokens[t], t, std::span(x).subspan(t * d, d));
  }
  auto last_row = [&](const std::vector<double>& m) {
    return std::vector<double>(m.end() - static_cast<std::ptrdiff_t>(d), m.end());
  };
  out.hidden_per_layer.emplace_back(last_row(x), 0);

  for (int l = 0; l < cfg.num_layers; ++l) {
    const auto& block = w.blocks[static_cast<std::size_t>(l)];
    std::vector<double> q(t_len * d), k(t_len * d), v(t_len * d);
    for (std::size_t t = 0; t < t_len; ++t) {
      const auto normed = RmsNorm(std::span(x).subspan(t * d, d), block.attn_norm);
      MatVec(block.wq, normed, std::span(q).subspan(t * d, d));
      MatVec(block.wk, normed, std::span(k).subspan(t * d, d));
      MatVec(block.wv, normed, std::span(v).subspan(t * d, d));
    }
    for (std::size_t i = 0; i < t_len * d; ++i) {
      k[i] = StorageRound(k[i], cfg.bytes_per_element);
      v[i] = StorageRound(v[i], cfg.bytes_per_element);
    }
    for (std::size_t t = 0; t < t_len; ++t) {
      result.cache.Append(l, std::span(k).subspan(t * d, d),
                          std::span(v).subspan(t * d, d));
    }

    // weights: [H x T x T], masked entries exactly zero.
    std::vector<double> weights(heads * t_len * t_len, 0.0);
    std::vector<double> attn(t_len * d, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < t_len; ++i) {
        double* row = weights.data() + (h * t_len + i) * t_len;
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          double s = 0.0;
          for (std::size_t c = 0; c < hd; ++c) {
            s += q[i * d + h * hd + c] * k[j * d + h * hd + c];
          }
          row[j] = s * scale;
          max_score = std::max(max_score, row[j]);
        }
        double sum = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          row[j] = std::exp(row[j] - max_score);
          sum += row[j];
        }
        for (std::size_t j = 0; j <= i; ++j) row[j] /= sum;
        for (std::size_t c = 0; c < hd; ++c) {
          double acc = 0.0;
          for (std::size_t j = 0; j <= i; ++j) acc += row[j] * v[j * d + h * hd + c];
          attn[i * d + h * hd + c] = acc;
        }
      }
    }
    for (std::size_t t = 0; t < t_len; ++t) {
      std::vector<double> proj(d);
      MatVec(block.wo, std::span(attn).subspan(t * d, d), proj);
      for (std::size_t i = 0; i < d; ++i) x[t * d + i] += proj[i];
      MlpResidual(cfg, block, std::span(x).subspan(t * d, d));
    }
    out.hidden_per_layer.emplace_back(last_row(x), l + 1);

    if (capture_attention) {
      std::vector<double> slice(heads * t_len);
      for (std::size_t h = 0; h < heads; ++h) {
        const double* row = weights.data() + (h * t_len + (t_len - 1)) * t_len;
        std::copy(row, row + t_len, slice.begin() + static_cast<std::ptrdiff_t>(h * t_len));
      }
      out.attention_per_layer.push_back(
          metrics::AttentionSlice::FromRowMajor(slice, heads, t_len));
    }
    if (capture_attention_matrices) {
      result.attention_matrices.push_back(std::move(weights));
    }
  }
  for (std::size_t t = 0; t < t_len; ++t) result.cache.CommitPosition();

  out.logits = Logits(model, std::span(x).subspan((t_len - 1) * d, d));
  FillKvAccounting(model, result.cache, out);
  return result;
}

std::string_view StopReasonName(StopReason reason) {
  switch (reason) {
    case StopReason::kNone: return "none";
    case StopReason::kStopToken: return "stop_token";
    case StopReason::kMaxSteps: return "max_steps";
    case StopReason::kRepetition: return "repetition";
  }
  return "unknown";
}

DecodeSession::DecodeSession(std::unordered_set<TokenId> stop_set,
                             std::int64_t max_steps)
    : stop_set_(std::move(stop_set)), max_steps_(max_steps) {}

void DecodeSession::RecordGenerated(TokenId token) {
  ++step_;
  generated_.push_back(token);
  recent_.push_back(token);
  if (recent_.size() > kRepetitionWindow) recent_.pop_front();
}

bool DecodeSession::RepetitionDetected() const {
  if (recent_.size() < kRepetitionWindow) return false;
  return std::all_of(recent_.begin(), recent_.end(),
                     [&](TokenId t) { return t == recent_.front(); });
}

StepOutputs Prefill(const Model& model, DecodeSession& session,
                    std::span<const TokenId> prompt, bool capture_attention) {
  if (session.initialized_) {
    Fail(ErrorCode::kInvalidArgument, "decode session already prefilled");
  }
  auto full = ForwardFull(model, prompt, capture_attention);
  session.cache_ = std::move(full.cache);
  session.positions_.assign(prompt.begin(), prompt.end());
  session.initialized_ = true;
  return std::move(full.last);
}

StepOutputs ForwardIncremental(const Model& model, DecodeSession& session,
                               TokenId new_token, bool capture_attention) {
  if (!session.initialized_) {
    Fail(ErrorCode::kInvalidArgument,
         "incremental forward on a session without a prompt phase");
  }
  const auto& cfg = model.config();
  const auto& w = model.weights();
  const auto d = static_cast<std::size_t>(cfg.d_model);
  const auto heads = static_cast<std::size_t>(cfg.num_heads);
  const auto hd = static_cast<std::size_t>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  KvCache& cache = session.cache_;
  const std::size_t pos = cache.seq_len();
  const std::size_t key_len = pos + 1;

  StepOutputs out;
  std::vector<double> x(d);
  Embed(model, new_token, pos, x);
  out.hidden_per_layer.emplace_back(x, 0);

  for (int l = 0; l < cfg.num_layers; ++l) {
    const auto& block = w.blocks[static_cast<std::size_t>(l)];
    const auto normed = RmsNorm(x, block.attn_norm);
    std::vector<double> q(d), k(d), v(d);
    MatVec(block.wq, normed, q);
    MatVec(block.wk, normed, k);
    MatVec(block.wv, normed, v);
    cache.Append(l, k, v);

    std::vector<double> slice(heads * key_len);
    std::vector<double> attn(d, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
      double* row = slice.data() + h * key_len;
      double max_score = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < key_len; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) {
          s += q[h * hd + c] * cache.Key(l, j, h * hd + c);
        }
        row[j] = s * scale;
        max_score = std::max(max_score, row[j]);
      }
      double sum = 0.0;
      for (std::size_t j = 0; j < key_len; ++j) {
        row[j] = std::exp(row[j] - max_score);
        sum += row[j];
      }
      for (std::size_t j = 0; j < key_len; ++j) row[j] /= sum;
      for (std::size_t c = 0; c < hd; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < key_len; ++j) {
          acc += row[j] * cache.Value(l, j, h * hd + c);
        }
        attn[h * hd + c] = acc;
      }
    }
    std::vector<double> proj(d);
    MatVec(block.wo, attn, proj);
    for (std::size_t i = 0; i < d; ++i) x[i] += proj[i];
    MlpResidual(cfg, block, x);
    out.hidden_per_layer.emplace_back(x, l + 1);
    if (capture_attention) {
      out.attention_per_layer.push_back(
          metrics::AttentionSlice::FromRowMajor(slice, heads, key_len));
    }
  }
  cache.CommitPosition();
  session.positions_.push_back(new_token);

  out.logits = Logits(model, x);
  FillKvAccounting(model, cache, out);
  return out;
}

TokenId ArgmaxLowestId(std::span<const double> logits) {
  if (logits.empty()) Fail(ErrorCode::kInvalidArgument, "argmax of empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

void AppendStepRows(std::vector<trace::TraceRow>& rows,
                    const std::string& model_id, const std::string& prompt_id,
                    trace::Phase phase, std::int64_t step,
                    std::optional<TokenId> token, const StepOutputs& outputs,
                    const StepOutputs* previous, bool capture_attention,
                    bool capture_hidden) {
  auto base_row = [&](std::int64_t layer) {
    trace::TraceRow row;
    row.model_id = model_id;
    row.prompt_id = prompt_id;
    row.phase = phase;
    row.step = step;
    row.layer = layer;
    return row;
  };

  const auto probs = metrics::Softmax(outputs.logits);
  trace::TraceRow summary = base_row(trace::kStepSummaryLayer);
  if (token) summary.token_id = *token;
  summary.output_entropy = metrics::ShannonEntropy(probs);
  summary.top1_prob = metrics::Top1Prob(probs);
  summary.top1_top2_gap = metrics::Top1Top2Gap(probs);
  summary.kv_total_bytes = outputs.kv_total_bytes;
  rows.push_back(std::move(summary));

  const auto& hidden = outputs.hidden_per_layer;
  const std::size_t num_blocks = outputs.kv_layer_bytes.size();
  for (std::size_t layer = 0; layer <= num_blocks; ++layer) {
    if (layer == 0 && !capture_hidden) continue;
    trace::TraceRow row = base_row(static_cast<std::int64_t>(layer));
    if (capture_hidden) {
      row.hidden_l2 = metrics::HiddenL2(hidden[layer]);
      if (layer >= 1) {
        row.delta_l2_prev_layer = metrics::DeltaL2(hidden[layer], hidden[layer - 1]);
      }
      if (previous != nullptr) {
        row.delta_l2_prev_step =
            metrics::DeltaL2(hidden[layer], previous->hidden_per_layer[layer]);
      }
    }
    if (layer >= 1) {
      if (capture_attention && !outputs.attention_per_layer.empty()) {
        const auto head_entropies =
            metrics::AttentionEntropyPerHead(outputs.attention_per_layer[layer - 1]);
        row.attn_entropy_mean = metrics::LayerAttentionEntropy(head_entropies);
        row.hdi = metrics::HeadDispersionIndex(head_entropies);
      }
      row.kv_layer_bytes = outputs.kv_layer_bytes[layer - 1];
    }
    rows.push_back(std::move(row));
  }
}

DecodeResult GreedyDecodeTrace(const Model& model,
                               std::span<const TokenId> prompt,
                               const DecodeOptions& options) {
  if (prompt.empty()) Fail(ErrorCode::kInvalidArgument, "empty prompt");
  if (options.max_steps < 1) {
    Fail(ErrorCode::kInvalidArgument, "max_steps must be >= 1");
  }
  const std::string model_id = model.id();
  DecodeSession session(
      std::unordered_set<TokenId>(options.stop_tokens.begin(),
                                  options.stop_tokens.end()),
      options.max_steps);
  DecodeResult result;

  StepOutputs prompt_out =
      Prefill(model, session, prompt, options.capture_attention);
  if (options.observer) options.observer(trace::Phase::kPrompt, 0, prompt_out);
  AppendStepRows(result.rows, model_id, options.prompt_id, trace::Phase::kPrompt,
                 0, std::nullopt, prompt_out, nullptr, options.capture_attention,
                 options.capture_hidden);

  TokenId last = prompt.back();
  std::optional<StepOutputs> previous;
  while (true) {
    StepOutputs out =
        ForwardIncremental(model, session, last, options.capture_attention);
    const std::int64_t step = session.step() + 1;
    if (options.observer) options.observer(trace::Phase::kGen, step, out);
    const TokenId next = ArgmaxLowestId(out.logits);
    session.RecordGenerated(next);
    AppendStepRows(result.rows, model_id, options.prompt_id, trace::Phase::kGen,
                   step, next, out, previous ? &*previous : nullptr,
                   options.capture_attention, options.capture_hidden);
    previous = std::move(out);
    last = next;

    if (session.RepetitionDetected()) {
      result.stop_reason = StopReason::kRepetition;
      break;
    }
    if (session.stop_set().contains(next)) {
      result.stop_reason = StopReason::kStopToken;
      break;
    }
    if (session.step() >= session.max_steps()) {
      result.stop_reason = StopReason::kMaxSteps;
      break;
    }
  }
  result.generated_ids.assign(session.generated().begin(),
                              session.generated().end());
  return result;
}

}  // namespace tracescope::decoder
