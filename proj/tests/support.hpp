#pragma once

#include <atomic>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fast3d/grid.hpp"
#include "fast3d/pipeline.hpp"

namespace fast3d::testing {

inline LatentGrid random_grid(const GridDims& dims, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  LatentGrid g(dims);
  for (auto& x : g.data()) x = static_cast<float>(normal(rng));
  return g;
}

inline OccupancyGrid random_occupancy(std::int64_t d, std::int64_t h, std::int64_t w,
                                      std::mt19937_64& rng, double p = 0.5) {
  std::bernoulli_distribution coin(p);
  OccupancyGrid g(d, h, w);
  for (std::int64_t i = 0; i < g.cell_count(); ++i) g.assign(i, coin(rng));
  return g;
}

/// Velocity that does not depend on the state, the step or the guidance branch.
class ConstantOracle final : public VelocityOracle {
 public:
  explicit ConstantOracle(LatentGrid v) : v_(std::move(v)) {}
  void evaluate(const LatentGrid&, const StepContext&, bool, std::span<const ActiveToken> active,
                std::span<float> out) const override {
    const auto c = v_.dims().channels;
    for (std::size_t j = 0; j < active.size(); ++j) {
      for (std::int64_t k = 0; k < c; ++k) {
        out[j * static_cast<std::size_t>(c) + static_cast<std::size_t>(k)] =
            v_.at(active[j].batch, k, active[j].token);
      }
    }
  }

 private:
  LatentGrid v_;
};

/// State-dependent field: v = a(t, branch) * state + b(token, channel), so that
/// stale and fresh velocities differ and errors propagate through the state.
class LinearOracle final : public VelocityOracle {
 public:
  LinearOracle(GridDims dims, std::uint64_t seed) : bias_(dims) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& x : bias_.data()) x = static_cast<float>(normal(rng));
  }
  void evaluate(const LatentGrid& state, const StepContext& ctx, bool conditional,
                std::span<const ActiveToken> active, std::span<float> out) const override {
    calls.fetch_add(1);
    tokens.fetch_add(static_cast<std::int64_t>(active.size()));
    const auto c = state.dims().channels;
    const double a = (conditional ? 0.8 : 0.3) * ctx.t + 0.05 * ctx.step;
    for (std::size_t j = 0; j < active.size(); ++j) {
      for (std::int64_t k = 0; k < c; ++k) {
        const double s = state.at(active[j].batch, k, active[j].token);
        out[j * static_cast<std::size_t>(c) + static_cast<std::size_t>(k)] =
            static_cast<float>(a * s + bias_.at(active[j].batch, k, active[j].token));
      }
    }
  }

  mutable std::atomic<int> calls{0};
  mutable std::atomic<std::int64_t> tokens{0};

 private:
  LatentGrid bias_;
};

/// Decoder wrapper that counts decode calls.
class CountingDecoder final : public OccupancyDecoder {
 public:
  explicit CountingDecoder(DecoderSpec spec) : inner_(spec) {}
  OccupancyGrid decode(const LatentGrid& grid, std::int64_t batch) const override {
    decodes.fetch_add(1);
    return inner_.decode(grid, batch);
  }
  double gamma_up() const override { return inner_.gamma_up(); }

  mutable std::atomic<int> decodes{0};

 private:
  ThresholdDecoder inner_;
};

}  // namespace fast3d::testing
