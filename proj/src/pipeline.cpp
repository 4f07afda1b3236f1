#include "fast3d/pipeline.hpp"

#include <string>
#include <utility>

#include "fast3d/error.hpp"

namespace fast3d {

Fast3DSampler::Fast3DSampler(SamplerConfig config, const VelocityOracle& oracle,
                             const OccupancyDecoder& decoder)
    : config_(std::move(config)),
      schedule_((config_.validate(), config_.total_steps), config_.eta),
      oracle_(oracle),
      decoder_(decoder) {
  if (decoder_.gamma_up() != config_.gamma_up) {
    throw InvalidArgument("decoder gamma_up differs from the sampler configuration");
  }
}

SamplerState Fast3DSampler::begin(LatentGrid noise) const {
  noise.dims().validate();
  if (!noise.all_finite()) throw InvalidArgument("initial noise contains non-finite values");
  SamplerState s;
  const GridDims dims = noise.dims();
  s.state = std::move(noise);
  s.v_cache = VelocityField{LatentGrid(dims), 0};
  s.v_prev_cache = VelocityField{LatentGrid(dims), 0};
  return s;
}

StepRecord Fast3DSampler::step(SamplerState& s, const RunOptions& options) const {
  const int k = s.next_step;
  if (k < 1 || k > config_.total_steps) {
    throw InvalidArgument("step " + std::to_string(k) + " outside [1, " +
                          std::to_string(config_.total_steps) + "]");
  }
  const GridDims dims = s.state.dims();
  const std::int64_t batch = dims.batch;
  const std::int64_t np = dims.tokens();
  const std::int64_t channels = dims.channels;

  StepRecord rec;
  rec.step = k;
  rec.t = schedule_.t(k);
  rec.t_prev = schedule_.t_prev(k);
  rec.phase = phase_of(k, config_);
  rec.guided = step_is_guided(schedule_, k, config_.cfg_interval);

  // (a) budget and SSC partition, independently per batch element.
  std::vector<ActiveToken> active;
  active.reserve(static_cast<std::size_t>(batch * np));
  bool any_cached = false;
  for (std::int64_t b = 0; b < batch; ++b) {
    const PcscCalibration* cal =
        s.calibrations.empty() ? nullptr : &s.calibrations[static_cast<std::size_t>(b)];
    const std::int64_t quota = budget_for_step(k, config_, cal, np);
    CachePartition part;
    if (quota > 0) {
      const auto scores = score_tokens(s.v_cache.values, s.v_prev_cache.values, b, config_.omega);
      part = select_partition(scores.score, quota, s.consecutive_cached, config_.tau);
    } else {
      part = full_partition(np);
    }
    for (const auto i : part.active) active.push_back({b, i});
    rec.quota.push_back(quota);
    rec.active_tokens += static_cast<std::int64_t>(part.active.size());
    rec.cached_tokens += static_cast<std::int64_t>(part.cached.size());
    rec.forced_refresh = rec.forced_refresh || part.forced_refresh;
    any_cached = any_cached || !part.cached.empty();
    rec.partitions.push_back(std::move(part));
  }

  // (b) evaluate the oracle on active tokens only, (c) splice into the cache.
  VelocityField v_t{s.v_cache.values, k};
  if (!active.empty()) {
    const StepContext ctx{k, rec.t, rec.t_prev};
    const auto n = active.size() * static_cast<std::size_t>(channels);
    std::vector<float> cond(n);
    oracle_.evaluate(s.state, ctx, true, active, cond);
    ++rec.oracle_calls;
    if (rec.guided) {
      std::vector<float> uncond(n);
      oracle_.evaluate(s.state, ctx, false, active, uncond);
      ++rec.oracle_calls;
      const auto scale = static_cast<float>(config_.cfg_scale);
      for (std::size_t i = 0; i < n; ++i) cond[i] = uncond[i] + scale * (cond[i] - uncond[i]);
    }
    for (std::size_t j = 0; j < active.size(); ++j) {
      for (std::int64_t c = 0; c < channels; ++c) {
        v_t.values.at(active[j].batch, c, active[j].token) =
            cond[j * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)];
      }
    }
  }

  // (d) Euler update on every token.
  const auto dt = static_cast<float>(rec.t - rec.t_prev);
  auto x = s.state.data();
  const auto v = std::as_const(v_t.values).data();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = x[i] - dt * v[i];
  if (!s.state.all_finite()) {
    throw OracleError("state became non-finite at step " + std::to_string(k));
  }

  // (e) rotate caches, (f) global consecutive-cache counter.
  s.v_prev_cache = std::move(s.v_cache);
  s.v_cache = std::move(v_t);
  s.consecutive_cached = any_cached ? s.consecutive_cached + 1 : 0;

  // One-time PCSC calibration from the decodes at steps anchor - 1 and anchor.
  if (config_.policy == BudgetPolicy::Pcsc) {
    const int anchor = config_.anchor_step();
    if (k == anchor - 1) {
      std::vector<OccupancyGrid> occ;
      for (std::int64_t b = 0; b < batch; ++b) occ.push_back(decoder_.decode(s.state, b));
      s.pre_anchor_occupancy = std::move(occ);
    } else if (k == anchor) {
      if (!s.pre_anchor_occupancy) {
        throw CalibrationError("no occupancy recorded before the anchor step");
      }
      const PcscParams params{config_.total_steps, config_.rho_a, config_.mu, config_.gamma_up};
      std::int64_t total = 0;
      for (std::int64_t b = 0; b < batch; ++b) {
        const auto now = decoder_.decode(s.state, b);
        const auto ds =
            dynamic_voxel_count((*s.pre_anchor_occupancy)[static_cast<std::size_t>(b)], now);
        ++s.occupancy_comparisons;
        total += ds;
        s.calibrations.push_back(calibrate(ds, params, np));
      }
      s.pre_anchor_occupancy.reset();
      rec.delta_s = total;
    }
  }

  if (options.cost_model) {
    for (const auto& p : rec.partitions) {
      rec.flops += step_flops(*options.cost_model, static_cast<std::int64_t>(p.active.size()),
                              rec.guided, options.cfg_flops_factor);
    }
  }

  s.next_step = k + 1;
  if (options.observer) options.observer(rec, s.state);
  return rec;
}

RunResult Fast3DSampler::run(LatentGrid noise, const RunOptions& options) const {
  if (options.cost_model) options.cost_model->validate();
  SamplerState s = begin(std::move(noise));
  RunResult result;
  result.steps.reserve(static_cast<std::size_t>(config_.total_steps));
  for (int k = 1; k <= config_.total_steps; ++k) {
    auto rec = step(s, options);
    result.evaluated_tokens += rec.active_tokens;
    result.steps.push_back(std::move(rec));
  }
  result.final_state = std::move(s.state);
  result.calibrations = std::move(s.calibrations);
  result.occupancy_comparisons = s.occupancy_comparisons;
  return result;
}

}  // namespace fast3d
