#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace fast3d {

/// Shape of a dense latent tensor, (B, C, D, H, W), batch outermost and width
/// innermost.
struct GridDims {
  std::int64_t batch = 1;
  std::int64_t channels = 1;
  std::int64_t depth = 1;
  std::int64_t height = 1;
  std::int64_t width = 1;

  std::int64_t tokens() const { return depth * height * width; }
  std::int64_t elements() const { return batch * channels * tokens(); }
  bool valid() const {
    return batch >= 1 && channels >= 1 && depth >= 1 && height >= 1 && width >= 1;
  }
  void validate() const;

  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Token linearization: depth-major, i = d*H*W + h*W + w.
inline std::int64_t token_index(const GridDims& dims, std::int64_t d, std::int64_t h,
                                std::int64_t w) {
  return (d * dims.height + h) * dims.width + w;
}

/// Dense real-valued state S_t.
class LatentGrid {
 public:
  LatentGrid() = default;
  explicit LatentGrid(GridDims dims);
  LatentGrid(GridDims dims, std::vector<float> data);

  const GridDims& dims() const { return dims_; }
  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  /// Flat offset of channel c of token i in batch element b.
  std::int64_t offset(std::int64_t b, std::int64_t c, std::int64_t token) const {
    return (b * dims_.channels + c) * dims_.tokens() + token;
  }
  float& at(std::int64_t b, std::int64_t c, std::int64_t token) {
    return data_[static_cast<std::size_t>(offset(b, c, token))];
  }
  float at(std::int64_t b, std::int64_t c, std::int64_t token) const {
    return data_[static_cast<std::size_t>(offset(b, c, token))];
  }

  bool all_finite() const;

  friend bool operator==(const LatentGrid&, const LatentGrid&) = default;

 private:
  GridDims dims_{};
  std::vector<float> data_;
};

/// A predicted velocity v_t together with the sampler step that produced it.
/// step_index 0 marks the zero-initialized cache before any evaluation.
struct VelocityField {
  LatentGrid values;
  int step_index = 0;
};

/// Token-major view of a LatentGrid: for every batch element, N_p tokens of C
/// scalars each.
struct TokenView {
  GridDims dims;
  std::vector<float> data;  // [batch][token][channel]

  std::int64_t token_count() const { return dims.tokens(); }
  std::int64_t token_dim() const { return dims.channels; }
  std::span<const float> token(std::int64_t batch, std::int64_t i) const;
};

TokenView flatten_tokens(const LatentGrid& grid);
LatentGrid unflatten_tokens(const TokenView& view);

/// Binary occupancy decoded from one batch element of a latent grid.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(std::int64_t depth, std::int64_t height, std::int64_t width);
  explicit OccupancyGrid(std::int64_t resolution)
      : OccupancyGrid(resolution, resolution, resolution) {}

  std::int64_t depth() const { return depth_; }
  std::int64_t height() const { return height_; }
  std::int64_t width() const { return width_; }
  /// Cells per axis; only meaningful as a single number for cubic grids.
  std::int64_t resolution() const { return depth_; }
  std::int64_t cell_count() const { return depth_ * height_ * width_; }

  bool get(std::int64_t i, std::int64_t j, std::int64_t k) const { return test(linear(i, j, k)); }
  void set(std::int64_t i, std::int64_t j, std::int64_t k, bool value) {
    assign(linear(i, j, k), value);
  }
  bool test(std::int64_t cell) const {
    return (words_[static_cast<std::size_t>(cell >> 6)] >> (cell & 63)) & 1U;
  }
  void assign(std::int64_t cell, bool value);

  std::int64_t count() const;
  bool same_shape(const OccupancyGrid& other) const {
    return depth_ == other.depth_ && height_ == other.height_ && width_ == other.width_;
  }
  std::span<const std::uint64_t> words() const { return words_; }

  friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;

 private:
  std::int64_t linear(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return (i * height_ + j) * width_ + k;
  }

  std::int64_t depth_ = 0;
  std::int64_t height_ = 0;
  std::int64_t width_ = 0;
  std::vector<std::uint64_t> words_;  // unused high bits of the last word stay zero
};

/// Parameters of the surrogate decoder: nearest-neighbour upsampling of one
/// channel by the per-axis factor cbrt(gamma_up), then a strict threshold.
struct DecoderSpec {
  double gamma_up = 64.0;
  std::int64_t channel = 0;
  float threshold = 0.0F;

  /// Integer cube root of gamma_up; throws InvalidArgument if it is not one.
  std::int64_t upsample_factor() const;
};

/// Pluggable latent-to-occupancy decoder. Scheduling logic depends only on the
/// OccupancyGrid it returns.
class OccupancyDecoder {
 public:
  virtual ~OccupancyDecoder() = default;
  virtual OccupancyGrid decode(const LatentGrid& grid, std::int64_t batch) const = 0;
  /// Volumetric ratio between decoded cells and latent tokens.
  virtual double gamma_up() const = 0;
};

class ThresholdDecoder final : public OccupancyDecoder {
 public:
  explicit ThresholdDecoder(DecoderSpec spec);
  OccupancyGrid decode(const LatentGrid& grid, std::int64_t batch) const override;
  double gamma_up() const override { return spec_.gamma_up; }
  const DecoderSpec& spec() const { return spec_; }

 private:
  DecoderSpec spec_;
  std::int64_t factor_;
};

OccupancyGrid decode_occupancy(const LatentGrid& grid, const DecoderSpec& spec,
                               std::int64_t batch = 0);

/// Number of cells whose occupancy differs (Hamming distance), i.e. the dynamic
/// voxel count between two consecutive decodes.
std::int64_t dynamic_voxel_count(const OccupancyGrid& prev, const OccupancyGrid& next);

}  // namespace fast3d
