#include "fast3d/schedule.hpp"

#include <cmath>
#include <string>

#include "fast3d/error.hpp"

namespace fast3d {

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::FullSampling:
      return "full_sampling";
    case Phase::DynamicCaching:
      return "dynamic_caching";
    case Phase::CfgFreeRefinement:
      return "cfg_free_refinement";
  }
  return "unknown";
}

std::string policy_name(BudgetPolicy policy, double fixed_active_ratio) {
  switch (policy) {
    case BudgetPolicy::Pcsc:
      return "pcsc";
    case BudgetPolicy::Disabled:
      return "none";
    case BudgetPolicy::Fixed: {
      std::string r = std::to_string(fixed_active_ratio);
      while (r.size() > 1 && r.back() == '0') r.pop_back();
      if (!r.empty() && r.back() == '.') r.pop_back();
      return "fixed:" + r;
    }
  }
  return "unknown";
}

void SamplerConfig::validate() const {
  auto fail = [](const std::string& msg) { throw InvalidArgument(msg); };
  if (total_steps < 1) fail("total_steps must be >= 1");
  if (!(rho_a > 0.0 && rho_a < 1.0)) fail("rho_a must lie in (0, 1)");
  if (!(rho_cfg_off > 0.0 && rho_cfg_off < 1.0)) fail("rho_cfg_off must lie in (0, 1)");
  if (!(rho_a < rho_cfg_off)) fail("rho_a must be smaller than rho_cfg_off");
  if (!std::isfinite(mu)) fail("mu must be finite");
  if (!(omega >= 0.0 && omega <= 1.0)) fail("omega must lie in [0, 1]");
  if (tau < 0) fail("tau must be >= 1, or 0 to disable");
  if (!(xi > 0.0 && xi <= 1.0)) fail("xi must lie in (0, 1]");
  if (f_corr < 0) fail("f_corr must be >= 0");
  if (!(eta >= 1.0) || !std::isfinite(eta)) fail("eta must be >= 1");
  if (!(cfg_interval.lo >= 0.0 && cfg_interval.lo <= cfg_interval.hi && cfg_interval.hi <= 1.0)) {
    fail("cfg interval must satisfy 0 <= lo <= hi <= 1");
  }
  if (!std::isfinite(cfg_scale)) fail("cfg_scale must be finite");
  if (!(gamma_up > 0.0)) fail("gamma_up is required and must be > 0");
  if (!(fixed_active_ratio >= 0.0 && fixed_active_ratio <= 1.0)) {
    fail("fixed active ratio must lie in [0, 1]");
  }
  if (policy == BudgetPolicy::Pcsc && anchor_step() < 2) {
    throw CalibrationError("anchor step ceil(N * rho_a) = " + std::to_string(anchor_step()) +
                           " must be >= 2 for PCSC calibration");
  }
}

int SamplerConfig::anchor_step() const { return ceil_fraction_of_steps(total_steps, rho_a); }

int SamplerConfig::refinement_start_step() const {
  return ceil_fraction_of_steps(total_steps, rho_cfg_off);
}

double shift_time(double uniform_t, double eta) {
  return eta * uniform_t / (1.0 + (eta - 1.0) * uniform_t);
}

double unshift_time(double t, double eta) { return t / (eta - (eta - 1.0) * t); }

TimeSchedule::TimeSchedule(int total_steps, double eta) {
  if (total_steps < 1) throw InvalidArgument("schedule needs at least one step");
  if (!(eta >= 1.0)) throw InvalidArgument("shift factor eta must be >= 1");
  times_.reserve(static_cast<std::size_t>(total_steps) + 1);
  const double n = total_steps;
  for (int k = 1; k <= total_steps; ++k) {
    times_.push_back(shift_time(1.0 - static_cast<double>(k - 1) / n, eta));
  }
  times_.push_back(0.0);
}

TimeSchedule build_time_schedule(int total_steps, double eta) {
  return TimeSchedule(total_steps, eta);
}

bool step_is_guided(const TimeSchedule& schedule, int step, const CfgInterval& cfg) {
  return schedule.t_prev(step) >= cfg.lo && schedule.t(step) <= cfg.hi;
}

std::optional<int> cfg_off_step(const TimeSchedule& schedule, const CfgInterval& cfg) {
  bool seen_guided = false;
  for (int k = 1; k <= schedule.steps(); ++k) {
    const bool guided = step_is_guided(schedule, k, cfg);
    if (guided) {
      seen_guided = true;
    } else if (seen_guided) {
      return k;
    }
  }
  return std::nullopt;
}

Phase phase_of(int step, const SamplerConfig& config) {
  if (step < 1 || step > config.total_steps) {
    throw InvalidArgument("step " + std::to_string(step) + " outside [1, " +
                          std::to_string(config.total_steps) + "]");
  }
  if (step <= config.anchor_step()) return Phase::FullSampling;
  if (step >= config.refinement_start_step()) return Phase::CfgFreeRefinement;
  return Phase::DynamicCaching;
}

namespace {

std::int64_t round_half_up(double x) { return static_cast<std::int64_t>(std::floor(x + 0.5)); }

}  // namespace

std::int64_t budget_for_step(int step, const SamplerConfig& config,
                             const PcscCalibration* calibration, std::int64_t total_tokens) {
  if (config.policy == BudgetPolicy::Disabled) return 0;
  const Phase phase = phase_of(step, config);
  // SSC needs two stored velocity fields, available from step 3 on.
  if (step < 3) return 0;

  if (phase == Phase::CfgFreeRefinement) {
    const int k_refine = step - config.refinement_start_step();
    if (config.f_corr > 0 && (k_refine + 1) % config.f_corr == 0) return 0;
    return round_half_up(static_cast<double>(total_tokens) * config.xi);
  }

  if (config.policy == BudgetPolicy::Fixed) {
    return round_half_up(static_cast<double>(total_tokens) * (1.0 - config.fixed_active_ratio));
  }

  if (phase == Phase::FullSampling) return 0;
  if (calibration == nullptr) {
    throw CalibrationError("PCSC budget requested at step " + std::to_string(step) +
                           " before calibration");
  }
  return cache_quota(*calibration, step);
}

}  // namespace fast3d
