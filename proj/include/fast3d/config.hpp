#pragma once

#include <string>
#include <string_view>

namespace fast3d {

enum class Phase { FullSampling, DynamicCaching, CfgFreeRefinement };

std::string_view phase_name(Phase phase);

/// Continuous-time window in which classifier-free guidance is applied.
struct CfgInterval {
  double lo = 0.5;
  double hi = 1.0;
};

/// How the Phase 1/2 cache budget is chosen.
///  - Pcsc: full sampling up to the anchor, then the calibrated PCSC quota.
///  - Fixed: no calibration; from step 3 until Phase 3 a constant fraction
///    (1 - fixed_active_ratio) of the tokens is cached.
///  - Disabled: quota 0 at every step (plain Euler sampling).
enum class BudgetPolicy { Pcsc, Fixed, Disabled };

std::string policy_name(BudgetPolicy policy, double fixed_active_ratio);

struct SamplerConfig {
  int total_steps = 25;
  double rho_a = 0.2;
  double rho_cfg_off = 0.75;
  double mu = -0.07;
  double omega = 0.7;
  int tau = 3;  // 0 disables Error Accumulation Elimination
  double xi = 0.7;
  int f_corr = 3;  // 0 disables Phase 3 correction steps
  double eta = 3.0;
  CfgInterval cfg_interval{};
  double cfg_scale = 3.0;
  double gamma_up = 0.0;  // required; no default is assumed for the decoder ratio

  BudgetPolicy policy = BudgetPolicy::Pcsc;
  double fixed_active_ratio = 0.25;

  /// Throws InvalidArgument (or CalibrationError for a too-short Phase 1).
  void validate() const;

  int anchor_step() const;
  int refinement_start_step() const;
};

}  // namespace fast3d
