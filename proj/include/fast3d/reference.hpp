#pragma once

#include "fast3d/config.hpp"
#include "fast3d/grid.hpp"
#include "fast3d/pipeline.hpp"

namespace fast3d {

/// Plain rectified-flow Euler sampler that evaluates every token at every
/// step. Written independently of Fast3DSampler so it can serve as an oracle;
/// only total_steps, eta, cfg_interval and cfg_scale are read from `config`.
LatentGrid run_full_oracle(const SamplerConfig& config, const VelocityOracle& oracle,
                           LatentGrid noise);

}  // namespace fast3d
