#include "fast3d/metrics.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "fast3d/error.hpp"

namespace fast3d {

double relative_l2(const LatentGrid& a, const LatentGrid& b) {
  if (a.dims() != b.dims()) throw ShapeMismatch("relative_l2 needs equal shapes");
  double diff = 0.0, ref = 0.0;
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - y[i];
    diff += d * d;
    ref += static_cast<double>(y[i]) * y[i];
  }
  if (ref == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(diff) / std::sqrt(ref);
}

namespace {

struct Counts {
  std::int64_t inter = 0;
  std::int64_t uni = 0;
};

Counts iou_counts(const OccupancyGrid& a, const OccupancyGrid& b) {
  if (!a.same_shape(b)) throw ShapeMismatch("occupancy grids differ in resolution");
  Counts c;
  const auto wa = a.words();
  const auto wb = b.words();
  for (std::size_t i = 0; i < wa.size(); ++i) {
    c.inter += std::popcount(wa[i] & wb[i]);
    c.uni += std::popcount(wa[i] | wb[i]);
  }
  return c;
}

}  // namespace

double occupancy_iou(const OccupancyGrid& a, const OccupancyGrid& b) {
  const auto c = iou_counts(a, b);
  return c.uni == 0 ? 1.0 : static_cast<double>(c.inter) / static_cast<double>(c.uni);
}

double latent_occupancy_iou(const LatentGrid& a, const LatentGrid& b,
                            const OccupancyDecoder& decoder) {
  if (a.dims() != b.dims()) throw ShapeMismatch("latent_occupancy_iou needs equal shapes");
  Counts total;
  for (std::int64_t batch = 0; batch < a.dims().batch; ++batch) {
    const auto c = iou_counts(decoder.decode(a, batch), decoder.decode(b, batch));
    total.inter += c.inter;
    total.uni += c.uni;
  }
  return total.uni == 0 ? 1.0 : static_cast<double>(total.inter) / static_cast<double>(total.uni);
}

}  // namespace fast3d
