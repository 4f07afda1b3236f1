#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fast3d/config.hpp"
#include "fast3d/pcsc.hpp"

namespace fast3d {

/// t = eta * u / (1 + (eta - 1) * u), mapping a uniform time u in [0, 1] onto
/// the shifted schedule.
double shift_time(double uniform_t, double eta);

/// Inverse of shift_time.
double unshift_time(double t, double eta);

/// Continuous times of an N-step sampler, descending from 1 towards 0.
class TimeSchedule {
 public:
  TimeSchedule(int total_steps, double eta);

  int steps() const { return static_cast<int>(times_.size()) - 1; }
  /// t_k for step k in [1, N].
  double t(int step) const { return times_[static_cast<std::size_t>(step - 1)]; }
  /// t_{k+1}; zero for the final step.
  double t_prev(int step) const { return times_[static_cast<std::size_t>(step)]; }
  double dt(int step) const { return t(step) - t_prev(step); }
  /// All N + 1 boundaries, the last one being 0.
  const std::vector<double>& boundaries() const { return times_; }

 private:
  std::vector<double> times_;
};

TimeSchedule build_time_schedule(int total_steps, double eta);

/// A step is guided when its whole integration interval [t_prev, t] lies inside
/// the CFG interval.
bool step_is_guided(const TimeSchedule& schedule, int step, const CfgInterval& cfg);

/// First step that runs without guidance after at least one guided step; empty
/// when guidance never switches off.
std::optional<int> cfg_off_step(const TimeSchedule& schedule, const CfgInterval& cfg);

Phase phase_of(int step, const SamplerConfig& config);

/// Number of tokens to cache at `step` before SSC selection (tau is applied
/// later by select_partition). `calibration` is required for Phase 2 under the
/// PCSC policy.
std::int64_t budget_for_step(int step, const SamplerConfig& config,
                             const PcscCalibration* calibration, std::int64_t total_tokens);

}  // namespace fast3d
