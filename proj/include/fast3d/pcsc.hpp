#pragma once

#include <cstdint>

namespace fast3d {

/// ceil(total_steps * rho_a), with a small guard so that products which are
/// integral in exact arithmetic (25 * 0.2) are not pushed up by rounding.
int ceil_fraction_of_steps(int total_steps, double fraction);

struct PcscParams {
  int total_steps = 25;
  double rho_a = 0.2;
  double mu = -0.07;
  double gamma_up = 64.0;
};

/// One-time calibration of the log-linear dynamic-voxel decay, taken at the
/// anchor step (the last full-sampling step).
struct PcscCalibration {
  double sigma = 0.0;  // dynamic voxels measured at the anchor
  double mu = -0.07;   // fixed log-slope per step
  int anchor_step = 2;
  double gamma_up = 64.0;
  std::int64_t total_tokens = 1;
};

PcscCalibration calibrate(std::int64_t delta_s_at_anchor, const PcscParams& params,
                          std::int64_t total_tokens);

/// sigma * exp(mu * (k - anchor)).
double predict_dynamic_voxels(const PcscCalibration& cal, int step);

/// Number of tokens to cache at step k:
/// clamp(round_half_up(total_tokens - predicted / gamma_up), 0, total_tokens).
std::int64_t cache_quota(const PcscCalibration& cal, int step);

}  // namespace fast3d
