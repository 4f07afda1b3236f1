#include "fast3d/reference.hpp"

#include <cmath>
#include <vector>

#include "fast3d/error.hpp"

namespace fast3d {

LatentGrid run_full_oracle(const SamplerConfig& config, const VelocityOracle& oracle,
                           LatentGrid noise) {
  const GridDims dims = noise.dims();
  dims.validate();
  const int n = config.total_steps;
  if (n < 1) throw InvalidArgument("total_steps must be >= 1");
  const double eta = config.eta;
  const std::int64_t np = dims.tokens();
  const std::int64_t ch = dims.channels;

  std::vector<ActiveToken> all;
  all.reserve(static_cast<std::size_t>(dims.batch * np));
  for (std::int64_t b = 0; b < dims.batch; ++b) {
    for (std::int64_t i = 0; i < np; ++i) all.push_back({b, i});
  }
  std::vector<float> vc(all.size() * static_cast<std::size_t>(ch));
  std::vector<float> vu(vc.size());

  auto time_at = [&](int k) {
    if (k > n) return 0.0;
    const double u = 1.0 - static_cast<double>(k - 1) / static_cast<double>(n);
    return eta * u / (1.0 + (eta - 1.0) * u);
  };

  for (int k = 1; k <= n; ++k) {
    const double t = time_at(k);
    const double t_next = time_at(k + 1);
    const bool guided = t_next >= config.cfg_interval.lo && t <= config.cfg_interval.hi;
    const StepContext ctx{k, t, t_next};

    oracle.evaluate(noise, ctx, true, all, vc);
    if (guided) {
      oracle.evaluate(noise, ctx, false, all, vu);
      const float s = static_cast<float>(config.cfg_scale);
      for (std::size_t i = 0; i < vc.size(); ++i) vc[i] = vu[i] + s * (vc[i] - vu[i]);
    }

    const float dt = static_cast<float>(t - t_next);
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(all.size()); ++j) {
      for (std::int64_t c = 0; c < ch; ++c) {
        float& x = noise.at(all[j].batch, c, all[j].token);
        x = x - dt * vc[static_cast<std::size_t>(j * ch + c)];
      }
    }
  }
  return noise;
}

}  // namespace fast3d
