#include "fast3d/flops.hpp"

#include <cmath>
#include <string>

#include "fast3d/error.hpp"

namespace fast3d {

void BlockDims::validate() const {
  if (batch < 1 || d_model < 1 || heads < 1 || n_cond < 1 || d_cond < 1 || mlp_ratio < 1 ||
      blocks < 1) {
    throw InvalidArgument("block dimensions must be >= 1");
  }
  if (tokens < 0) throw InvalidArgument("token count must be >= 0");
  if (d_model % heads != 0) {
    throw InvalidArgument("d_model " + std::to_string(d_model) + " is not divisible by " +
                          std::to_string(heads) + " heads");
  }
}

ModulationTerms modulation_terms(const BlockDims& d) {
  return {.silu = 5 * d.batch * d.d_model, .linear = 2 * d.batch * d.d_model * (6 * d.d_model)};
}

SelfAttentionTerms self_attention_terms(const BlockDims& d) {
  const auto b = d.batch, n = d.tokens, dm = d.d_model, h = d.heads;
  const auto head_dim = dm / h;
  return {
      .qkv = 2 * b * n * dm * (3 * dm),
      .qk = 2 * b * h * n * n * head_dim,
      .softmax = 5 * b * h * n * n,
      .attn_v = 2 * b * h * n * n * head_dim,
      .out_proj = 2 * b * n * dm * dm,
  };
}

CrossAttentionTerms cross_attention_terms(const BlockDims& d) {
  const auto b = d.batch, n = d.tokens, dm = d.d_model, h = d.heads;
  const auto nc = d.n_cond, dc = d.d_cond;
  const auto head_dim = dm / h;
  return {
      .q = 2 * b * n * dm * dm,
      .kv = 2 * b * nc * dc * (2 * dm),
      .qk = 2 * b * h * n * nc * head_dim,
      .softmax = 5 * b * h * n * nc,
      .attn_v = 2 * b * h * n * nc * head_dim,
      .out_proj = 2 * b * n * dm * dm,
  };
}

MlpTerms mlp_terms(const BlockDims& d) {
  const auto d_mlp = d.mlp_ratio * d.d_model;
  return {
      .fc1 = 2 * d.batch * d.tokens * d.d_model * d_mlp,
      .activation = 5 * d.batch * d.tokens * d_mlp,
      .fc2 = 2 * d.batch * d.tokens * d_mlp * d.d_model,
  };
}

Flops flops_modulation(const BlockDims& d) {
  return 5 * d.batch * d.d_model + 12 * d.batch * d.d_model * d.d_model;
}

Flops flops_layernorm(const BlockDims& d) { return 7 * d.batch * d.tokens * d.d_model; }

Flops flops_self_attention(const BlockDims& d) {
  const auto b = d.batch, n = d.tokens, dm = d.d_model;
  return 8 * b * n * dm * dm + 4 * b * n * n * dm + 5 * b * d.heads * n * n;
}

Flops flops_cross_attention(const BlockDims& d) {
  const auto b = d.batch, n = d.tokens, dm = d.d_model, nc = d.n_cond;
  return 4 * b * n * dm * dm + 4 * b * nc * d.d_cond * dm + 4 * b * n * nc * dm +
         5 * b * d.heads * n * nc;
}

Flops flops_mlp(const BlockDims& d) {
  const auto r = d.mlp_ratio;
  return 4 * r * d.batch * d.tokens * d.d_model * d.d_model + 5 * r * d.batch * d.tokens * d.d_model;
}

Flops flops_block(const BlockDims& d) {
  return flops_modulation(d) + kLayerNormsPerBlock * flops_layernorm(d) + flops_self_attention(d) +
         flops_cross_attention(d) + flops_mlp(d);
}

Flops step_flops(const BlockDims& model, std::int64_t active_tokens, bool guided,
                 double cfg_factor) {
  if (active_tokens < 0) throw InvalidArgument("active token count must be >= 0");
  if (active_tokens == 0) return 0;
  BlockDims d = model;
  d.batch = 1;
  d.tokens = active_tokens;
  const Flops base = d.blocks * flops_block(d);
  if (!guided || cfg_factor == 1.0) return base;
  return static_cast<Flops>(std::llround(static_cast<double>(base) * cfg_factor));
}

Flops flops_run(std::span<const StepCost> steps, const BlockDims& model, double cfg_factor) {
  Flops total = 0;
  for (const auto& s : steps) {
    for (const auto n : s.active_per_batch) total += step_flops(model, n, s.guided, cfg_factor);
  }
  return total;
}

}  // namespace fast3d
