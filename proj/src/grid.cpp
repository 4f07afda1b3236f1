#include "fast3d/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "fast3d/error.hpp"

namespace fast3d {

void GridDims::validate() const {
  if (!valid()) {
    throw InvalidArgument("grid dims must all be >= 1, got (" + std::to_string(batch) + ", " +
                          std::to_string(channels) + ", " + std::to_string(depth) + ", " +
                          std::to_string(height) + ", " + std::to_string(width) + ")");
  }
}

LatentGrid::LatentGrid(GridDims dims) : dims_(dims) {
  dims_.validate();
  data_.assign(static_cast<std::size_t>(dims_.elements()), 0.0F);
}

LatentGrid::LatentGrid(GridDims dims, std::vector<float> data)
    : dims_(dims), data_(std::move(data)) {
  dims_.validate();
  if (static_cast<std::int64_t>(data_.size()) != dims_.elements()) {
    throw ShapeMismatch("latent data has " + std::to_string(data_.size()) +
                        " elements, dims require " + std::to_string(dims_.elements()));
  }
}

bool LatentGrid::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float x) { return std::isfinite(x); });
}

std::span<const float> TokenView::token(std::int64_t batch, std::int64_t i) const {
  const auto c = dims.channels;
  const auto start = static_cast<std::size_t>((batch * dims.tokens() + i) * c);
  return std::span<const float>(data).subspan(start, static_cast<std::size_t>(c));
}

TokenView flatten_tokens(const LatentGrid& grid) {
  const auto& dims = grid.dims();
  TokenView view{dims, std::vector<float>(static_cast<std::size_t>(dims.elements()))};
  const auto np = dims.tokens();
  const auto nc = dims.channels;
  for (std::int64_t b = 0; b < dims.batch; ++b) {
    for (std::int64_t c = 0; c < nc; ++c) {
      for (std::int64_t i = 0; i < np; ++i) {
        view.data[static_cast<std::size_t>((b * np + i) * nc + c)] = grid.at(b, c, i);
      }
    }
  }
  return view;
}

LatentGrid unflatten_tokens(const TokenView& view) {
  const auto& dims = view.dims;
  if (static_cast<std::int64_t>(view.data.size()) != dims.elements()) {
    throw ShapeMismatch("token view size does not match its dims");
  }
  LatentGrid grid(dims);
  const auto np = dims.tokens();
  const auto nc = dims.channels;
  for (std::int64_t b = 0; b < dims.batch; ++b) {
    for (std::int64_t i = 0; i < np; ++i) {
      for (std::int64_t c = 0; c < nc; ++c) {
        grid.at(b, c, i) = view.data[static_cast<std::size_t>((b * np + i) * nc + c)];
      }
    }
  }
  return grid;
}

OccupancyGrid::OccupancyGrid(std::int64_t depth, std::int64_t height, std::int64_t width)
    : depth_(depth), height_(height), width_(width) {
  if (depth < 1 || height < 1 || width < 1) {
    throw InvalidArgument("occupancy extents must be >= 1");
  }
  words_.assign(static_cast<std::size_t>((cell_count() + 63) / 64), 0);
}

void OccupancyGrid::assign(std::int64_t cell, bool value) {
  auto& word = words_[static_cast<std::size_t>(cell >> 6)];
  const std::uint64_t mask = std::uint64_t{1} << (cell & 63);
  word = value ? (word | mask) : (word & ~mask);
}

std::int64_t OccupancyGrid::count() const {
  std::int64_t n = 0;
  for (auto w : words_) n += std::popcount(w);
  return n;
}

std::int64_t DecoderSpec::upsample_factor() const {
  if (!(gamma_up >= 1.0) || !std::isfinite(gamma_up)) {
    throw InvalidArgument("gamma_up must be >= 1, got " + std::to_string(gamma_up));
  }
  const auto f = static_cast<std::int64_t>(std::llround(std::cbrt(gamma_up)));
  if (static_cast<double>(f * f * f) != gamma_up) {
    throw InvalidArgument("gamma_up " + std::to_string(gamma_up) +
                          " has no integer cube root");
  }
  return f;
}

ThresholdDecoder::ThresholdDecoder(DecoderSpec spec)
    : spec_(spec), factor_(spec.upsample_factor()) {
  if (spec_.channel < 0) throw InvalidArgument("decoder channel must be >= 0");
}

OccupancyGrid ThresholdDecoder::decode(const LatentGrid& grid, std::int64_t batch) const {
  const auto& dims = grid.dims();
  if (spec_.channel >= dims.channels) {
    throw InvalidArgument("decoder channel " + std::to_string(spec_.channel) +
                          " out of range for " + std::to_string(dims.channels) + " channels");
  }
  if (batch < 0 || batch >= dims.batch) throw InvalidArgument("batch index out of range");

  const auto f = factor_;
  OccupancyGrid occ(dims.depth * f, dims.height * f, dims.width * f);
  for (std::int64_t d = 0; d < dims.depth; ++d) {
    for (std::int64_t h = 0; h < dims.height; ++h) {
      for (std::int64_t w = 0; w < dims.width; ++w) {
        if (!(grid.at(batch, spec_.channel, token_index(dims, d, h, w)) > spec_.threshold)) {
          continue;
        }
        for (std::int64_t i = d * f; i < (d + 1) * f; ++i) {
          for (std::int64_t j = h * f; j < (h + 1) * f; ++j) {
            for (std::int64_t k = w * f; k < (w + 1) * f; ++k) occ.set(i, j, k, true);
          }
        }
      }
    }
  }
  return occ;
}

OccupancyGrid decode_occupancy(const LatentGrid& grid, const DecoderSpec& spec,
                               std::int64_t batch) {
  return ThresholdDecoder(spec).decode(grid, batch);
}

std::int64_t dynamic_voxel_count(const OccupancyGrid& prev, const OccupancyGrid& next) {
  if (!prev.same_shape(next)) {
    throw ShapeMismatch("occupancy resolution mismatch");
  }
  const auto a = prev.words();
  const auto b = next.words();
  std::int64_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += std::popcount(a[i] ^ b[i]);
  return n;
}

}  // namespace fast3d
