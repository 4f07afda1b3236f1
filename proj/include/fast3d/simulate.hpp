#pragma once

#include <cstdint>
#include <string>

#include "fast3d/config.hpp"
#include "fast3d/flops.hpp"
#include "fast3d/grid.hpp"
#include "fast3d/pipeline.hpp"
#include "fast3d/report.hpp"
#include "fast3d/synthetic.hpp"

namespace fast3d {

struct SimulationSpec {
  SamplerConfig config;
  GridDims dims{1, 8, 16, 16, 16};
  std::uint64_t seed = 0;
  ShapeKind shape = ShapeKind::Sphere;
  BlockDims model{};  // `tokens` and `batch` are ignored; billing is per sample
  double cfg_flops_factor = 2.0;

  SamplerConfig resolved_config() const;
};

struct SimulationOutcome {
  RunReport report;
  RunResult cached;
  LatentGrid full_final;
};

/// Runs the cached sampler and the full-sampling oracle from the same noise
/// and fills a RunReport comparing them.
SimulationOutcome evaluate_policy(const SimulationSpec& spec, const VelocityOracle& oracle,
                                  const LatentGrid& noise, const std::string& source);

/// evaluate_policy on the seeded synthetic field described by `spec`.
SimulationOutcome simulate(const SimulationSpec& spec);

/// Replays a trace file; the initial noise is regenerated from `spec.seed`
/// with the trace's shape.
SimulationOutcome replay(const SimulationSpec& spec, const std::string& trace_path);

}  // namespace fast3d
