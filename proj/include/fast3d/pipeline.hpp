#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fast3d/config.hpp"
#include "fast3d/flops.hpp"
#include "fast3d/grid.hpp"
#include "fast3d/pcsc.hpp"
#include "fast3d/schedule.hpp"
#include "fast3d/ssc.hpp"

namespace fast3d {

struct ActiveToken {
  std::int64_t batch = 0;
  std::int64_t token = 0;
};

struct StepContext {
  int step = 1;
  double t = 1.0;
  double t_prev = 0.0;
};

/// Stand-in for the flow transformer. Implementations must be safe to call
/// concurrently from independent runs.
class VelocityOracle {
 public:
  virtual ~VelocityOracle() = default;

  /// Writes the velocity of every requested token into `out`, laid out as
  /// out[j * C + c] for the j-th entry of `active`. `conditional` selects the
  /// conditional or unconditional branch of classifier-free guidance.
  virtual void evaluate(const LatentGrid& state, const StepContext& ctx, bool conditional,
                        std::span<const ActiveToken> active, std::span<float> out) const = 0;
};

struct StepRecord {
  int step = 0;
  double t = 0.0;
  double t_prev = 0.0;
  Phase phase = Phase::FullSampling;
  bool guided = false;
  std::vector<std::int64_t> quota;            // requested cache budget per batch element
  std::vector<CachePartition> partitions;     // per batch element
  std::int64_t active_tokens = 0;             // summed over the batch
  std::int64_t cached_tokens = 0;             // summed over the batch
  bool forced_refresh = false;                // tau emptied a non-empty budget
  Flops flops = 0;                            // zero unless a cost model is attached
  std::optional<std::int64_t> delta_s;        // summed over the batch; set at the anchor only
  int oracle_calls = 0;
};

/// Mutable state owned by one run.
struct SamplerState {
  LatentGrid state;
  VelocityField v_cache;
  VelocityField v_prev_cache;
  int consecutive_cached = 0;
  int next_step = 1;
  std::vector<PcscCalibration> calibrations;  // one per batch element, set at the anchor
  std::optional<std::vector<OccupancyGrid>> pre_anchor_occupancy;
  std::int64_t occupancy_comparisons = 0;
};

struct RunOptions {
  std::optional<BlockDims> cost_model;
  double cfg_flops_factor = 2.0;
  /// Called after each step with its record and the updated state.
  std::function<void(const StepRecord&, const LatentGrid&)> observer;
};

struct RunResult {
  LatentGrid final_state;
  std::vector<StepRecord> steps;
  std::vector<PcscCalibration> calibrations;
  std::int64_t evaluated_tokens = 0;  // sum of active tokens over all steps
  std::int64_t occupancy_comparisons = 0;
};

/// The three-phase cached sampling loop. Holds references to the oracle and
/// decoder; both must outlive the sampler.
class Fast3DSampler {
 public:
  Fast3DSampler(SamplerConfig config, const VelocityOracle& oracle,
                const OccupancyDecoder& decoder);

  const SamplerConfig& config() const { return config_; }
  const TimeSchedule& schedule() const { return schedule_; }

  SamplerState begin(LatentGrid noise) const;

  /// Executes step `state.next_step` and advances it.
  StepRecord step(SamplerState& state, const RunOptions& options = {}) const;

  RunResult run(LatentGrid noise, const RunOptions& options = {}) const;

 private:
  SamplerConfig config_;
  TimeSchedule schedule_;
  const VelocityOracle& oracle_;
  const OccupancyDecoder& decoder_;
};

}  // namespace fast3d
