#pragma once

#include <cstdint>
#include <span>

namespace fast3d {

using Flops = std::int64_t;

/// Dimensions of one flow-transformer block. `tokens` is the number of tokens
/// that pass through the block at a given step.
struct BlockDims {
  std::int64_t batch = 1;
  std::int64_t tokens = 4096;
  std::int64_t d_model = 1024;
  std::int64_t heads = 16;
  std::int64_t n_cond = 1374;
  std::int64_t d_cond = 1024;
  std::int64_t mlp_ratio = 4;
  std::int64_t blocks = 24;

  /// Throws InvalidArgument unless every field is >= 1 (tokens >= 0) and
  /// d_model is divisible by heads.
  void validate() const;
};

struct ModulationTerms {
  Flops silu = 0;    // 5 B D
  Flops linear = 0;  // 2 B D (6 D)
  Flops sum() const { return silu + linear; }
};

struct SelfAttentionTerms {
  Flops qkv = 0;
  Flops qk = 0;
  Flops softmax = 0;
  Flops attn_v = 0;
  Flops out_proj = 0;
  Flops sum() const { return qkv + qk + softmax + attn_v + out_proj; }
};

struct CrossAttentionTerms {
  Flops q = 0;
  Flops kv = 0;
  Flops qk = 0;
  Flops softmax = 0;
  Flops attn_v = 0;
  Flops out_proj = 0;
  Flops sum() const { return q + kv + qk + softmax + attn_v + out_proj; }
};

struct MlpTerms {
  Flops fc1 = 0;
  Flops activation = 0;
  Flops fc2 = 0;
  Flops sum() const { return fc1 + activation + fc2; }
};

ModulationTerms modulation_terms(const BlockDims& d);
SelfAttentionTerms self_attention_terms(const BlockDims& d);
CrossAttentionTerms cross_attention_terms(const BlockDims& d);
MlpTerms mlp_terms(const BlockDims& d);

// Collapsed closed forms; each equals the sum of its term struct.
Flops flops_modulation(const BlockDims& d);
Flops flops_layernorm(const BlockDims& d);
Flops flops_self_attention(const BlockDims& d);
/// 4 B N D^2 + 4 B Nc Dc D + 4 B N Nc D + 5 B H N Nc. With Dc = D the KV term
/// reduces to 4 B Nc D^2.
Flops flops_cross_attention(const BlockDims& d);
Flops flops_mlp(const BlockDims& d);

inline constexpr int kLayerNormsPerBlock = 3;

/// Mod + 3 LN + SA + CA + MLP.
Flops flops_block(const BlockDims& d);

/// Cost of one sampler step in which `active_tokens` tokens of one sample are
/// recomputed: blocks * flops_block(batch 1) * guidance factor. Zero when no
/// token is active, since the network is not invoked at all.
Flops step_flops(const BlockDims& model, std::int64_t active_tokens, bool guided,
                 double cfg_factor = 2.0);

struct StepCost {
  std::span<const std::int64_t> active_per_batch;
  bool guided = false;
};

/// Sum of step_flops over steps and batch elements.
Flops flops_run(std::span<const StepCost> steps, const BlockDims& model, double cfg_factor = 2.0);

}  // namespace fast3d
