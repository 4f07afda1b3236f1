#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fast3d/grid.hpp"

namespace fast3d {

/// tau value that turns Error Accumulation Elimination off.
inline constexpr int kTauDisabled = 0;

/// Per-token L2 norm over channels for one batch element: V_i.
std::vector<double> velocity_magnitude(const LatentGrid& v, std::int64_t batch = 0);

/// Per-token ||v_now,i - v_prev,i||_2 for one batch element: A_i, the
/// instantaneous error of reusing v_prev in place of v_now.
std::vector<double> acceleration(const LatentGrid& v_now, const LatentGrid& v_prev,
                                 std::int64_t batch = 0);

/// Min-max normalization to [0, 1]. A constant input maps to all zeros.
std::vector<double> minmax_normalize(std::span<const double> x);

/// C_i = omega * norm(A_i) + (1 - omega) * norm(V_i). Low scores are stable.
std::vector<double> cacheability_score(std::span<const double> velocity,
                                       std::span<const double> accel, double omega);

struct StabilityScores {
  std::vector<double> velocity;
  std::vector<double> accel;
  std::vector<double> score;
  double omega = 0.7;
};

StabilityScores score_tokens(const LatentGrid& v_now, const LatentGrid& v_prev,
                             std::int64_t batch, double omega);

struct CachePartition {
  std::vector<std::int64_t> active;  // ascending
  std::vector<std::int64_t> cached;  // ascending
  std::int64_t quota_used = 0;
  bool forced_refresh = false;  // quota was positive but tau emptied the cache set

  std::int64_t token_count() const {
    return static_cast<std::int64_t>(active.size() + cached.size());
  }
};

/// Everything active, nothing cached.
CachePartition full_partition(std::int64_t token_count);

/// Caches the `quota` lowest-scoring tokens (ties by ascending index); the rest
/// are active. When tau is enabled and consecutive_cached >= tau the cache set
/// is emptied. A quota larger than the token count is clamped.
CachePartition select_partition(std::span<const double> scores, std::int64_t quota,
                                int consecutive_cached, int tau);

}  // namespace fast3d
