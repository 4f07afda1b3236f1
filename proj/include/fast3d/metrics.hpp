#pragma once

#include "fast3d/grid.hpp"

namespace fast3d {

/// ||a - b||_2 / ||b||_2 over every element. Zero when a == b; infinite when b
/// is all zeros and a is not.
double relative_l2(const LatentGrid& a, const LatentGrid& b);

/// |a & b| / |a | b|; 1 when both grids are empty.
double occupancy_iou(const OccupancyGrid& a, const OccupancyGrid& b);

/// IoU of the decoded occupancies pooled over all batch elements.
double latent_occupancy_iou(const LatentGrid& a, const LatentGrid& b,
                            const OccupancyDecoder& decoder);

}  // namespace fast3d
