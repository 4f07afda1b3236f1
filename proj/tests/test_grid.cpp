#include <doctest.h>

#include <random>

#include "fast3d/error.hpp"
#include "fast3d/grid.hpp"
#include "support.hpp"

using namespace fast3d;
using fast3d::testing::random_grid;
using fast3d::testing::random_occupancy;

TEST_CASE("single-element grid flattens to one token") {
  LatentGrid g(GridDims{1, 1, 1, 1, 1}, {2.5F});
  const auto v = flatten_tokens(g);
  CHECK(v.token_count() == 1);
  CHECK(v.token_dim() == 1);
  CHECK(v.token(0, 0)[0] == 2.5F);
}

TEST_CASE("token linearization is depth-major") {
  const GridDims dims{1, 1, 2, 2, 2};
  CHECK(token_index(dims, 1, 0, 1) == 5);
  CHECK(token_index(dims, 0, 1, 0) == 2);
  const GridDims wide{1, 1, 2, 3, 4};
  CHECK(token_index(wide, 1, 2, 3) == 1 * 12 + 2 * 4 + 3);
}

TEST_CASE("flatten holds channels of a token contiguously") {
  std::mt19937_64 rng(3);
  const auto g = random_grid({2, 3, 2, 3, 4}, rng);
  const auto v = flatten_tokens(g);
  for (std::int64_t b = 0; b < 2; ++b) {
    for (std::int64_t i = 0; i < g.dims().tokens(); ++i) {
      const auto t = v.token(b, i);
      for (std::int64_t c = 0; c < 3; ++c) CHECK(t[static_cast<std::size_t>(c)] == g.at(b, c, i));
    }
  }
}

TEST_CASE("flatten then unflatten is the identity") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> extent(1, 5);
  for (int trial = 0; trial < 50; ++trial) {
    const GridDims dims{extent(rng), extent(rng), extent(rng), extent(rng), extent(rng)};
    const auto g = random_grid(dims, rng);
    CHECK(unflatten_tokens(flatten_tokens(g)) == g);
  }
  const auto g = random_grid({2, 3, 4, 4, 4}, rng);
  CHECK(unflatten_tokens(flatten_tokens(g)) == g);
}

TEST_CASE("grid construction validates shape") {
  CHECK_THROWS_AS(LatentGrid(GridDims{0, 1, 1, 1, 1}), InvalidArgument);
  CHECK_THROWS_AS(LatentGrid(GridDims{1, 1, 1, 1, 2}, {1.0F}), ShapeMismatch);
  LatentGrid g(GridDims{1, 1, 1, 1, 2});
  CHECK(g.all_finite());
  g.at(0, 0, 1) = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(g.all_finite());
}

TEST_CASE("all-zero grid decodes to empty occupancy") {
  const LatentGrid g(GridDims{1, 2, 4, 4, 4});
  const auto occ = decode_occupancy(g, DecoderSpec{8.0, 0, 0.0F});
  CHECK(occ.resolution() == 8);
  CHECK(occ.count() == 0);
}

TEST_CASE("single positive cell fills one upsampled block") {
  LatentGrid g(GridDims{1, 1, 3, 3, 3});
  g.at(0, 0, token_index(g.dims(), 1, 2, 0)) = 1.0F;
  const auto occ = decode_occupancy(g, DecoderSpec{8.0, 0, 0.0F});
  CHECK(occ.count() == 8);
  for (std::int64_t i = 2; i < 4; ++i) {
    for (std::int64_t j = 4; j < 6; ++j) {
      for (std::int64_t k = 0; k < 2; ++k) CHECK(occ.get(i, j, k));
    }
  }
}

TEST_CASE("decode matches per-cell brute force") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_grid({1, 1, 4, 4, 4}, rng);
    for (double gamma : {1.0, 8.0, 27.0}) {
      const DecoderSpec spec{gamma, 0, 0.1F};
      const auto f = spec.upsample_factor();
      const auto occ = decode_occupancy(g, spec);
      REQUIRE(occ.resolution() == 4 * f);
      for (std::int64_t i = 0; i < occ.depth(); ++i) {
        for (std::int64_t j = 0; j < occ.height(); ++j) {
          for (std::int64_t k = 0; k < occ.width(); ++k) {
            const float x = g.at(0, 0, token_index(g.dims(), i / f, j / f, k / f));
            CHECK(occ.get(i, j, k) == (x > 0.1F));
          }
        }
      }
    }
  }
}

TEST_CASE("decode reads the requested channel and batch element") {
  LatentGrid g(GridDims{2, 2, 1, 1, 2});
  g.at(1, 1, 1) = 3.0F;
  CHECK(decode_occupancy(g, DecoderSpec{1.0, 1, 0.0F}, 1).count() == 1);
  CHECK(decode_occupancy(g, DecoderSpec{1.0, 1, 0.0F}, 0).count() == 0);
  CHECK(decode_occupancy(g, DecoderSpec{1.0, 0, 0.0F}, 1).count() == 0);
}

TEST_CASE("decode rejects bad decoder specs") {
  const LatentGrid g(GridDims{1, 2, 2, 2, 2});
  CHECK_THROWS_AS(decode_occupancy(g, DecoderSpec{64.0, 2, 0.0F}), InvalidArgument);
  CHECK_THROWS_AS(decode_occupancy(g, DecoderSpec{10.0, 0, 0.0F}), InvalidArgument);
  CHECK_THROWS_AS(decode_occupancy(g, DecoderSpec{0.0, 0, 0.0F}), InvalidArgument);
  CHECK(DecoderSpec{64.0}.upsample_factor() == 4);
  CHECK(DecoderSpec{1.0}.upsample_factor() == 1);
}

TEST_CASE("dynamic voxel count of identical and complementary grids") {
  std::mt19937_64 rng(1);
  const auto a = random_occupancy(2, 2, 2, rng);
  CHECK(dynamic_voxel_count(a, a) == 0);
  OccupancyGrid complement(2, 2, 2);
  for (std::int64_t i = 0; i < 8; ++i) complement.assign(i, !a.test(i));
  CHECK(dynamic_voxel_count(a, complement) == 8);
}

TEST_CASE("dynamic voxel count equals triple-loop count") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_occupancy(8, 8, 8, rng);
    const auto b = random_occupancy(8, 8, 8, rng);
    std::int64_t naive = 0;
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 8; ++j) {
        for (int k = 0; k < 8; ++k) naive += a.get(i, j, k) != b.get(i, j, k) ? 1 : 0;
      }
    }
    CHECK(dynamic_voxel_count(a, b) == naive);
  }
}

TEST_CASE("dynamic voxel count is a metric") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = random_occupancy(5, 3, 7, rng, 0.3);
    const auto b = random_occupancy(5, 3, 7, rng, 0.6);
    const auto c = random_occupancy(5, 3, 7, rng);
    CHECK(dynamic_voxel_count(a, b) == dynamic_voxel_count(b, a));
    CHECK(dynamic_voxel_count(a, c) <= dynamic_voxel_count(a, b) + dynamic_voxel_count(b, c));
    CHECK((dynamic_voxel_count(a, b) == 0) == (a == b));
  }
}

TEST_CASE("dynamic voxel count rejects mismatched resolutions") {
  CHECK_THROWS_AS(dynamic_voxel_count(OccupancyGrid(4), OccupancyGrid(8)), ShapeMismatch);
  CHECK_THROWS_AS(dynamic_voxel_count(OccupancyGrid(4, 4, 2), OccupancyGrid(4, 2, 4)),
                  ShapeMismatch);
}
