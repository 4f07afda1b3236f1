#include "fast3d/ssc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fast3d/error.hpp"

namespace fast3d {

namespace {

void check_batch(const LatentGrid& v, std::int64_t batch) {
  if (batch < 0 || batch >= v.dims().batch) throw InvalidArgument("batch index out of range");
}

}  // namespace

std::vector<double> velocity_magnitude(const LatentGrid& v, std::int64_t batch) {
  check_batch(v, batch);
  const auto np = v.dims().tokens();
  std::vector<double> sq(static_cast<std::size_t>(np), 0.0);
  for (std::int64_t c = 0; c < v.dims().channels; ++c) {
    for (std::int64_t i = 0; i < np; ++i) {
      const double x = v.at(batch, c, i);
      sq[static_cast<std::size_t>(i)] += x * x;
    }
  }
  for (auto& x : sq) x = std::sqrt(x);
  return sq;
}

std::vector<double> acceleration(const LatentGrid& v_now, const LatentGrid& v_prev,
                                 std::int64_t batch) {
  if (v_now.dims() != v_prev.dims()) throw ShapeMismatch("velocity fields differ in shape");
  check_batch(v_now, batch);
  const auto np = v_now.dims().tokens();
  std::vector<double> sq(static_cast<std::size_t>(np), 0.0);
  for (std::int64_t c = 0; c < v_now.dims().channels; ++c) {
    for (std::int64_t i = 0; i < np; ++i) {
      const double x = static_cast<double>(v_now.at(batch, c, i)) - v_prev.at(batch, c, i);
      sq[static_cast<std::size_t>(i)] += x * x;
    }
  }
  for (auto& x : sq) x = std::sqrt(x);
  return sq;
}

std::vector<double> minmax_normalize(std::span<const double> x) {
  if (x.empty()) throw InvalidArgument("cannot normalize an empty array");
  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  std::vector<double> out(x.size(), 0.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - lo) / range;
  }
  return out;
}

std::vector<double> cacheability_score(std::span<const double> velocity,
                                       std::span<const double> accel, double omega) {
  if (!(omega >= 0.0 && omega <= 1.0)) {
    throw InvalidArgument("omega must lie in [0, 1], got " + std::to_string(omega));
  }
  if (velocity.size() != accel.size()) throw ShapeMismatch("V and A lengths differ");
  const auto nv = minmax_normalize(velocity);
  const auto na = minmax_normalize(accel);
  std::vector<double> score(nv.size());
  for (std::size_t i = 0; i < score.size(); ++i) {
    score[i] = omega * na[i] + (1.0 - omega) * nv[i];
  }
  return score;
}

StabilityScores score_tokens(const LatentGrid& v_now, const LatentGrid& v_prev,
                             std::int64_t batch, double omega) {
  StabilityScores s;
  s.omega = omega;
  s.velocity = velocity_magnitude(v_now, batch);
  s.accel = acceleration(v_now, v_prev, batch);
  s.score = cacheability_score(s.velocity, s.accel, omega);
  return s;
}

CachePartition full_partition(std::int64_t token_count) {
  CachePartition p;
  p.active.resize(static_cast<std::size_t>(token_count));
  std::iota(p.active.begin(), p.active.end(), std::int64_t{0});
  return p;
}

CachePartition select_partition(std::span<const double> scores, std::int64_t quota,
                                int consecutive_cached, int tau) {
  if (quota < 0) throw InvalidArgument("quota must be >= 0");
  if (tau < 0) throw InvalidArgument("tau must be >= 1, or 0 to disable");
  const auto n = static_cast<std::int64_t>(scores.size());
  const auto q = std::min(quota, n);

  const bool refresh = tau != kTauDisabled && consecutive_cached >= tau;
  if (q == 0 || refresh) {
    auto p = full_partition(n);
    p.forced_refresh = refresh && q > 0;
    return p;
  }

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::int64_t{0});
  auto less = [&](std::int64_t a, std::int64_t b) {
    const double sa = scores[static_cast<std::size_t>(a)];
    const double sb = scores[static_cast<std::size_t>(b)];
    return sa < sb || (sa == sb && a < b);
  };
  if (q < n) std::nth_element(order.begin(), order.begin() + q, order.end(), less);

  std::vector<char> is_cached(static_cast<std::size_t>(n), 0);
  for (std::int64_t i = 0; i < q; ++i) is_cached[static_cast<std::size_t>(order[i])] = 1;

  CachePartition p;
  p.quota_used = q;
  p.cached.reserve(static_cast<std::size_t>(q));
  p.active.reserve(static_cast<std::size_t>(n - q));
  for (std::int64_t i = 0; i < n; ++i) {
    (is_cached[static_cast<std::size_t>(i)] ? p.cached : p.active).push_back(i);
  }
  return p;
}

}  // namespace fast3d
