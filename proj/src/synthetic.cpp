#include "fast3d/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fast3d/error.hpp"
#include "fast3d/pcsc.hpp"
#include "fast3d/schedule.hpp"

namespace fast3d {

namespace {

constexpr std::uint64_t kFieldStream = 0x9E3779B97F4A7C15ULL;

struct Sphere {
  double cd, ch, cw, radius;
  double sdf(double d, double h, double w) const {
    return radius - std::sqrt((d - cd) * (d - cd) + (h - ch) * (h - ch) + (w - cw) * (w - cw));
  }
};

struct Box {
  double cd, ch, cw, half;
  double sdf(double d, double h, double w) const {
    return std::min({half - std::abs(d - cd), half - std::abs(h - ch), half - std::abs(w - cw)});
  }
};

std::vector<double> shape_sdf(const SyntheticFieldSpec& spec, std::mt19937_64& rng) {
  const auto& g = spec.dims;
  const double cd = (static_cast<double>(g.depth) - 1.0) / 2.0;
  const double ch = (static_cast<double>(g.height) - 1.0) / 2.0;
  const double cw = (static_cast<double>(g.width) - 1.0) / 2.0;
  const double extent = static_cast<double>(std::min({g.depth, g.height, g.width}));
  const double size = spec.shape_radius * extent;

  std::uniform_real_distribution<double> jitter(-0.15 * extent, 0.15 * extent);
  const double j[6] = {jitter(rng), jitter(rng), jitter(rng), jitter(rng), jitter(rng), jitter(rng)};

  std::vector<double> out(static_cast<std::size_t>(g.tokens()));
  for (std::int64_t d = 0; d < g.depth; ++d) {
    for (std::int64_t h = 0; h < g.height; ++h) {
      for (std::int64_t w = 0; w < g.width; ++w) {
        const double fd = static_cast<double>(d), fh = static_cast<double>(h),
                     fw = static_cast<double>(w);
        double v = 0.0;
        switch (spec.shape) {
          case ShapeKind::Sphere:
            v = Sphere{cd, ch, cw, size}.sdf(fd, fh, fw);
            break;
          case ShapeKind::Box:
            v = Box{cd, ch, cw, 0.8 * size}.sdf(fd, fh, fw);
            break;
          case ShapeKind::Union:
            v = std::max(Sphere{cd + j[0], ch + j[1], cw + j[2], 0.7 * size}.sdf(fd, fh, fw),
                         Box{cd + j[3], ch + j[4], cw + j[5], 0.6 * size}.sdf(fd, fh, fw));
            break;
        }
        out[static_cast<std::size_t>(token_index(g, d, h, w))] = v;
      }
    }
  }
  return out;
}

}  // namespace

std::string_view shape_name(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Sphere:
      return "sphere";
    case ShapeKind::Box:
      return "box";
    case ShapeKind::Union:
      return "union";
  }
  return "unknown";
}

ShapeKind parse_shape(std::string_view name) {
  if (name == "sphere") return ShapeKind::Sphere;
  if (name == "box") return ShapeKind::Box;
  if (name == "union") return ShapeKind::Union;
  throw InvalidArgument("unknown shape '" + std::string(name) + "'");
}

LatentGrid seeded_noise(const GridDims& dims, std::uint64_t seed) {
  dims.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentGrid grid(dims);
  for (auto& x : grid.data()) x = static_cast<float>(normal(rng));
  return grid;
}

SyntheticFieldSpec SyntheticFieldSpec::for_config(const SamplerConfig& config,
                                                  const GridDims& dims, std::uint64_t seed) {
  SyntheticFieldSpec spec;
  spec.dims = dims;
  spec.seed = seed;
  spec.total_steps = config.total_steps;
  spec.eta = config.eta;
  spec.rho_a = config.rho_a;
  spec.rho_cfg_off = config.rho_cfg_off;
  spec.cfg_cutoff = config.cfg_interval.lo;
  return spec;
}

void SyntheticFieldSpec::validate() const {
  dims.validate();
  if (total_steps < 1) throw InvalidArgument("synthetic field needs total_steps >= 1");
  if (!(eta >= 1.0)) throw InvalidArgument("synthetic field needs eta >= 1");
  if (!(shape_radius > 0.0)) throw InvalidArgument("shape radius must be > 0");
  if (!(eps_fast_scale > 0.0 && eps_slow_scale > 0.0)) {
    throw InvalidArgument("perturbation decay scales must be > 0");
  }
  if (!(crossing_cap > 0.0)) throw InvalidArgument("crossing cap must be > 0");
  if (!(refine_ratio > 0.0)) throw InvalidArgument("refine ratio must be > 0");
}

SyntheticField::SyntheticField(SyntheticFieldSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  noise_ = seeded_noise(spec_.dims, spec_.seed);
  target_ = LatentGrid(spec_.dims);
  perturbation_ = LatentGrid(spec_.dims);
  design_target();
}

void SyntheticField::design_target() {
  const auto& g = spec_.dims;
  const auto np = g.tokens();
  const int n = spec_.total_steps;
  std::mt19937_64 rng(spec_.seed ^ kFieldStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> freq(0.2, 0.8);
  std::uniform_real_distribution<double> phase(0.0, 6.0);

  sdf_ = shape_sdf(spec_, rng);

  // Crossing ratio |y0| / |y1| for a zero crossing at the midpoint of each step.
  const TimeSchedule schedule(n, spec_.eta);
  std::vector<double> ratio(static_cast<std::size_t>(n));
  for (int k = 1; k <= n; ++k) {
    const double mid = 0.5 * (schedule.t(k) + schedule.t_prev(k));
    ratio[static_cast<std::size_t>(k - 1)] = mid / (1.0 - mid);
  }
  const int anchor = std::min(ceil_fraction_of_steps(n, spec_.rho_a), n);
  const int refine = ceil_fraction_of_steps(n, spec_.rho_cfg_off);

  std::vector<double> tail_weight;
  for (int k = anchor + 1; k <= n; ++k) {
    tail_weight.push_back(std::exp(spec_.tail_slope * (k - anchor - 1)) *
                          (k >= refine ? spec_.refine_ratio : 1.0));
  }
  const double weight_sum = std::accumulate(tail_weight.begin(), tail_weight.end(), 0.0);

  for (std::int64_t b = 0; b < g.batch; ++b) {
    std::vector<std::int64_t> mismatched;
    for (std::int64_t i = 0; i < np; ++i) {
      const double y1 = noise_.at(b, 0, i);
      const double s = sdf_[static_cast<std::size_t>(i)] > 0.0 ? 1.0 : -1.0;
      if ((y1 > 0.0 ? 1.0 : (y1 < 0.0 ? -1.0 : 0.0)) == s) {
        const double depth = std::abs(sdf_[static_cast<std::size_t>(i)]);
        target_.at(b, 0, i) = static_cast<float>(s * std::min(2.0, 0.5 + 0.3 * depth));
      } else {
        mismatched.push_back(i);
      }
    }
    std::stable_sort(mismatched.begin(), mismatched.end(), [&](auto x, auto y) {
      return std::abs(noise_.at(b, 0, x)) < std::abs(noise_.at(b, 0, y));
    });

    // Earliest step whose crossing stays within the cap; non-decreasing in |y1|.
    const auto m = mismatched.size();
    std::vector<int> earliest(m), assigned(m);
    for (std::size_t j = 0; j < m; ++j) {
      const double a = std::abs(noise_.at(b, 0, mismatched[j]));
      int k = n;
      for (int s = 1; s <= n; ++s) {
        if (a * ratio[static_cast<std::size_t>(s - 1)] <= spec_.crossing_cap) {
          k = s;
          break;
        }
      }
      earliest[j] = k;
    }
    std::size_t burst = 0;
    while (burst < m && earliest[burst] <= anchor) ++burst;
    for (std::size_t j = 0; j < burst; ++j) assigned[j] = earliest[j];

    const auto rest = static_cast<std::int64_t>(m - burst);
    if (tail_weight.empty()) {
      for (std::size_t j = burst; j < m; ++j) assigned[j] = earliest[j];
    } else {
      std::vector<std::int64_t> count(tail_weight.size());
      std::int64_t placed = 0;
      for (std::size_t s = 0; s < tail_weight.size(); ++s) {
        count[s] = static_cast<std::int64_t>(
            std::floor(static_cast<double>(rest) * tail_weight[s] / weight_sum));
        placed += count[s];
      }
      count[0] += rest - placed;
      std::size_t j = burst;
      for (std::size_t s = 0; s < count.size(); ++s) {
        for (std::int64_t c = 0; c < count[s]; ++c) assigned[j++] = anchor + 1 + static_cast<int>(s);
      }
    }

    for (std::size_t j = 0; j < m; ++j) {
      const auto i = mismatched[j];
      const int step = std::max(assigned[j], earliest[j]);
      const double s = sdf_[static_cast<std::size_t>(i)] > 0.0 ? 1.0 : -1.0;
      const double a = std::abs(noise_.at(b, 0, i));
      target_.at(b, 0, i) = static_cast<float>(s * a * ratio[static_cast<std::size_t>(step - 1)]);
    }

    for (std::int64_t i = 0; i < np; ++i) {
      perturbation_.at(b, 0, i) = static_cast<float>(spec_.occupancy_coupling * normal(rng));
    }
    for (std::int64_t c = 1; c < g.channels; ++c) {
      const double fx = freq(rng), px = phase(rng), fy = freq(rng), py = phase(rng);
      for (std::int64_t d = 0; d < g.depth; ++d) {
        for (std::int64_t h = 0; h < g.height; ++h) {
          for (std::int64_t w = 0; w < g.width; ++w) {
            const auto i = token_index(g, d, h, w);
            const double sd = sdf_[static_cast<std::size_t>(i)];
            target_.at(b, c, i) = static_cast<float>(
                0.5 * std::sin(fx * static_cast<double>(w) + px) *
                std::cos(fy * static_cast<double>(h) + py));
            const double envelope = 0.25 + std::exp(-(sd / 2.0) * (sd / 2.0));
            perturbation_.at(b, c, i) =
                static_cast<float>(spec_.perturbation_scale * normal(rng) * envelope);
          }
        }
      }
    }
  }
}

double SyntheticField::epsilon(double t) const {
  const double u = 1.0 - unshift_time(t, spec_.eta);
  const double e = spec_.eps_fast * std::exp(-u / spec_.eps_fast_scale) +
                   spec_.eps_slow * std::exp(-u / spec_.eps_slow_scale);
  return t < spec_.cfg_cutoff ? e * spec_.cutoff_drop : e;
}

void SyntheticField::evaluate(const LatentGrid& state, const StepContext& ctx, bool conditional,
                              std::span<const ActiveToken> active, std::span<float> out) const {
  const auto& g = spec_.dims;
  if (state.dims() != g) throw ShapeMismatch("state shape differs from the synthetic field");
  const auto channels = static_cast<std::size_t>(g.channels);
  if (out.size() != active.size() * channels) {
    throw ShapeMismatch("output buffer must hold active.size() * channels values");
  }
  const double gain = epsilon(ctx.t) * (conditional ? 1.0 : spec_.uncond_gain);
  for (std::size_t j = 0; j < active.size(); ++j) {
    const auto [b, i] = active[j];
    if (b < 0 || b >= g.batch || i < 0 || i >= g.tokens()) {
      throw OracleError("active token out of range");
    }
    for (std::int64_t c = 0; c < g.channels; ++c) {
      const double v = (static_cast<double>(noise_.at(b, c, i)) - target_.at(b, c, i)) +
                       gain * perturbation_.at(b, c, i);
      out[j * channels + static_cast<std::size_t>(c)] = static_cast<float>(v);
    }
  }
}

}  // namespace fast3d
