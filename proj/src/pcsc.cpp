#include "fast3d/pcsc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fast3d/error.hpp"

namespace fast3d {

int ceil_fraction_of_steps(int total_steps, double fraction) {
  const double x = static_cast<double>(total_steps) * fraction;
  return static_cast<int>(std::ceil(x - 1e-9));
}

PcscCalibration calibrate(std::int64_t delta_s_at_anchor, const PcscParams& params,
                          std::int64_t total_tokens) {
  if (delta_s_at_anchor < 0) throw InvalidArgument("dynamic voxel count must be >= 0");
  if (!(params.gamma_up > 0.0)) throw InvalidArgument("gamma_up must be > 0");
  if (total_tokens < 1) throw InvalidArgument("total_tokens must be >= 1");
  const int anchor = ceil_fraction_of_steps(params.total_steps, params.rho_a);
  if (anchor < 2) {
    throw CalibrationError("anchor step ceil(" + std::to_string(params.total_steps) + " * " +
                           std::to_string(params.rho_a) + ") = " + std::to_string(anchor) +
                           " leaves fewer than two full steps");
  }
  return PcscCalibration{
      .sigma = static_cast<double>(delta_s_at_anchor),
      .mu = params.mu,
      .anchor_step = anchor,
      .gamma_up = params.gamma_up,
      .total_tokens = total_tokens,
  };
}

double predict_dynamic_voxels(const PcscCalibration& cal, int step) {
  if (step < cal.anchor_step) {
    throw InvalidArgument("step " + std::to_string(step) + " precedes anchor step " +
                          std::to_string(cal.anchor_step));
  }
  return cal.sigma * std::exp(cal.mu * static_cast<double>(step - cal.anchor_step));
}

std::int64_t cache_quota(const PcscCalibration& cal, int step) {
  const double predicted = predict_dynamic_voxels(cal, step);
  const double raw = static_cast<double>(cal.total_tokens) - predicted / cal.gamma_up;
  const double rounded = std::floor(raw + 0.5);
  const double total = static_cast<double>(cal.total_tokens);
  return static_cast<std::int64_t>(std::clamp(rounded, 0.0, total));
}

}  // namespace fast3d
