#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fast3d/config.hpp"
#include "fast3d/grid.hpp"
#include "fast3d/pipeline.hpp"

namespace fast3d {

enum class ShapeKind { Sphere, Box, Union };

std::string_view shape_name(ShapeKind kind);
ShapeKind parse_shape(std::string_view name);

/// Seeded standard-normal noise grid, the y_1 endpoint of the flow.
LatentGrid seeded_noise(const GridDims& dims, std::uint64_t seed);

/// Parameters of the synthetic velocity field
///   v = (y1 - y0) + eps(t) * g * (conditional ? 1 : uncond_gain).
/// Channel 0 of y0 is built so that each token whose noise sign disagrees with
/// the target shape crosses zero at a designed step: a burst during the
/// first steps, then a geometric tail. All constants are tuning knobs.
struct SyntheticFieldSpec {
  GridDims dims{1, 8, 16, 16, 16};
  std::uint64_t seed = 0;

  ShapeKind shape = ShapeKind::Sphere;
  double shape_radius = 0.3;  // fraction of the depth extent

  // Schedule the crossing design is aligned with.
  int total_steps = 25;
  double eta = 3.0;
  double rho_a = 0.2;
  double rho_cfg_off = 0.75;
  double cfg_cutoff = 0.5;

  // Perturbation amplitude eps(u) = fast * exp(-u / fast_scale) + slow * exp(-u / slow_scale),
  // with u the elapsed uniform time; multiplied by cutoff_drop once t < cfg_cutoff.
  double eps_fast = 4.0;
  double eps_fast_scale = 0.06;
  double eps_slow = 0.5;
  double eps_slow_scale = 0.5;
  double cutoff_drop = 0.3;
  double uncond_gain = 0.5;
  double perturbation_scale = 0.5;
  double occupancy_coupling = 0.0;  // perturbation amplitude on channel 0

  // Crossing-time design.
  double crossing_cap = 6.0;    // largest |y0| / |y1| ratio a crossing may demand
  double tail_slope = -0.1;     // log-slope of the per-step crossing counts
  double refine_ratio = 0.3;    // count multiplier for steps after the CFG cutoff

  /// Spec aligned with a sampler configuration and latent shape.
  static SyntheticFieldSpec for_config(const SamplerConfig& config, const GridDims& dims,
                                       std::uint64_t seed);

  void validate() const;
};

class SyntheticField final : public VelocityOracle {
 public:
  explicit SyntheticField(SyntheticFieldSpec spec);

  void evaluate(const LatentGrid& state, const StepContext& ctx, bool conditional,
                std::span<const ActiveToken> active, std::span<float> out) const override;

  const SyntheticFieldSpec& spec() const { return spec_; }
  /// y1, the initial state of a run.
  const LatentGrid& initial_noise() const { return noise_; }
  /// y0, the clean endpoint.
  const LatentGrid& target() const { return target_; }
  /// Spatial perturbation pattern g.
  const LatentGrid& perturbation() const { return perturbation_; }
  /// Signed distance to the shape surface per token, positive inside.
  const std::vector<double>& signed_distance() const { return sdf_; }
  double epsilon(double t) const;

 private:
  void design_target();

  SyntheticFieldSpec spec_;
  LatentGrid noise_;
  LatentGrid target_;
  LatentGrid perturbation_;
  std::vector<double> sdf_;
};

}  // namespace fast3d
