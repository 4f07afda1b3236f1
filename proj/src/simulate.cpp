#include "fast3d/simulate.hpp"

#include "fast3d/error.hpp"
#include "fast3d/metrics.hpp"
#include "fast3d/reference.hpp"
#include "fast3d/trace.hpp"

namespace fast3d {

SamplerConfig SimulationSpec::resolved_config() const {
  SamplerConfig c = config;
  c.validate();
  return c;
}

SimulationOutcome evaluate_policy(const SimulationSpec& spec, const VelocityOracle& oracle,
                                  const LatentGrid& noise, const std::string& source) {
  const SamplerConfig config = spec.resolved_config();
  spec.model.validate();
  const ThresholdDecoder decoder(DecoderSpec{config.gamma_up, 0, 0.0F});
  const Fast3DSampler sampler(config, oracle, decoder);
  const GridDims dims = noise.dims();

  RunReport report;
  report.source = source;
  report.policy = policy_name(config.policy, config.fixed_active_ratio);
  report.seed = spec.seed;
  report.config = config;
  report.dims = dims;
  report.model = spec.model;
  report.cfg_flops_factor = spec.cfg_flops_factor;

  // Per-step dynamic voxels of the cached run, for reporting only.
  std::vector<OccupancyGrid> previous;
  for (std::int64_t b = 0; b < dims.batch; ++b) previous.push_back(decoder.decode(noise, b));

  RunOptions options;
  options.cost_model = spec.model;
  options.cfg_flops_factor = spec.cfg_flops_factor;
  options.observer = [&](const StepRecord& rec, const LatentGrid& state) {
    ReportRow row;
    row.step = rec.step;
    row.t = rec.t;
    row.phase = rec.phase;
    row.guided = rec.guided;
    for (const auto q : rec.quota) row.quota += q;
    row.active = rec.active_tokens;
    row.cached = rec.cached_tokens;
    row.forced_refresh = rec.forced_refresh;
    row.flops = rec.flops;
    for (std::int64_t b = 0; b < dims.batch; ++b) {
      auto now = decoder.decode(state, b);
      row.delta_s += dynamic_voxel_count(previous[static_cast<std::size_t>(b)], now);
      previous[static_cast<std::size_t>(b)] = std::move(now);
    }
    report.rows.push_back(row);
  };

  SimulationOutcome out;
  out.cached = sampler.run(noise, options);
  out.full_final = run_full_oracle(config, oracle, noise);

  const TimeSchedule& schedule = sampler.schedule();
  for (int k = 1; k <= config.total_steps; ++k) {
    report.baseline_flops +=
        dims.batch * step_flops(spec.model, dims.tokens(), step_is_guided(schedule, k, config.cfg_interval),
                                spec.cfg_flops_factor);
  }
  for (const auto& row : report.rows) report.total_flops += row.flops;
  report.flops_reduction =
      report.baseline_flops > 0
          ? 1.0 - static_cast<double>(report.total_flops) / static_cast<double>(report.baseline_flops)
          : 0.0;
  report.relative_l2 = relative_l2(out.cached.final_state, out.full_final);
  report.occupancy_iou = latent_occupancy_iou(out.cached.final_state, out.full_final, decoder);
  report.evaluated_tokens = out.cached.evaluated_tokens;
  report.occupancy_comparisons = out.cached.occupancy_comparisons;
  for (const auto& c : out.cached.calibrations) report.sigma.push_back(c.sigma);
  out.report = std::move(report);
  return out;
}

SimulationOutcome simulate(const SimulationSpec& spec) {
  const SamplerConfig config = spec.resolved_config();
  auto field_spec = SyntheticFieldSpec::for_config(config, spec.dims, spec.seed);
  field_spec.shape = spec.shape;
  const SyntheticField field(field_spec);
  return evaluate_policy(spec, field, field.initial_noise(),
                         "synthetic:" + std::string(shape_name(spec.shape)));
}

SimulationOutcome replay(const SimulationSpec& spec, const std::string& trace_path) {
  const auto oracle = TraceReplayOracle::load(trace_path);
  const auto& h = oracle.header();
  if (static_cast<int>(h.steps) != spec.config.total_steps) {
    throw InvalidArgument("trace holds " + std::to_string(h.steps) + " steps but the sampler runs " +
                          std::to_string(spec.config.total_steps));
  }
  SimulationSpec s = spec;
  s.dims = h.dims;
  return evaluate_policy(s, oracle, seeded_noise(h.dims, spec.seed), "trace");
}

}  // namespace fast3d
