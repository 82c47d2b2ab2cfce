#include <cmath>

#include <gtest/gtest.h>

#include "dsmreg/errors.h"
#include "dsmreg/scene_graph.h"
#include "dsmreg/synth.h"

namespace dsmreg {
namespace {

TEST(SplitMix64, KnownSequence) {
  // Reference values of the SplitMix64 generator seeded with 0.
  SplitMix64 rng(0);
  EXPECT_EQ(rng.next(), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(rng.next(), 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(rng.next(), 0x06c45d188009454fULL);
}

TEST(SplitMix64, UniformRange) {
  SplitMix64 rng(5);
  double lo = 1, hi = 0, mean = 0;
  for (int k = 0; k < 10000; ++k) {
    const double x = rng.uniform();
    lo = std::min(lo, x);
    hi = std::max(hi, x);
    mean += x / 10000;
  }
  EXPECT_GE(lo, 0.0);
  EXPECT_LT(hi, 1.0);
  EXPECT_NEAR(mean, 0.5, 0.02);
}

TEST(DiamondSquare, DeterministicAndSized) {
  const auto a = diamond_square(4, 0.8, 10.0, 3);
  EXPECT_EQ(a.size(), 17u * 17u);
  EXPECT_EQ(a, diamond_square(4, 0.8, 10.0, 3));
  EXPECT_NE(a, diamond_square(4, 0.8, 10.0, 4));
  EXPECT_THROW(diamond_square(0, 0.8, 10.0, 3), DsmError);
}

TEST(Terrain, CenteredOnOrigin) {
  const auto t = make_terrain({101, 51, 0.5, 10.0, 0.8, 1});
  EXPECT_EQ(t.width(), 101);
  const Point3 c = uv_to_world(50, 25, t.geotransform());
  EXPECT_NEAR(c.x(), 0.0, 1e-12);
  EXPECT_NEAR(c.y(), 0.0, 1e-12);
  for (double h : read_all(t)) EXPECT_TRUE(std::isfinite(h));
}

TEST(Perturbation, WithinBounds) {
  SplitMix64 rng(9);
  const PerturbationBounds b{2.0, 5.0, 5.0, 0.5};
  const Point3 center(10, -20, 3);
  for (int k = 0; k < 200; ++k) {
    const auto p = random_perturbation(rng, b, 0.5, center);
    EXPECT_TRUE(p.is_valid());
    const double deg = p.angle() * 180.0 / M_PI;
    EXPECT_LE(deg, 2.0 + 1e-9);
    EXPECT_GE(deg, 1.0 - 1e-9);
    const Point3 d = p(center) - center;
    EXPECT_LE(std::hypot(d.x(), d.y()), 2.5 + 1e-9);
    EXPECT_GE(std::hypot(d.x(), d.y()), 1.25 - 1e-9);
    EXPECT_LE(std::abs(d.z()), 5.0 + 1e-9);
    EXPECT_GE(std::abs(d.z()), 2.5 - 1e-9);
  }
}

TEST(Mosaic, SingleUnperturbedTileIsCrop) {
  MosaicSpec spec;
  spec.rows = spec.cols = 1;
  spec.tile_size = 32;
  const auto s = make_mosaic(spec);
  ASSERT_EQ(s.tiles.size(), 1u);
  const auto& tile = s.tiles[0];
  const auto uv = world_to_uv(tile.geotransform().x_origin, tile.geotransform().y_origin,
                              s.truth.geotransform());
  const auto u0 = static_cast<std::int64_t>(std::llround(uv.u));
  const auto v0 = static_cast<std::int64_t>(std::llround(uv.v));
  const Window crop = read_window(s.truth, {u0, u0 + 31, v0, v0 + 31});
  EXPECT_EQ(read_all(tile), crop.heights);
}

TEST(Mosaic, TwoTilesHalfOverlap) {
  MosaicSpec spec;
  spec.rows = 1;
  spec.cols = 2;
  spec.tile_size = 64;
  spec.overlap = 0.5;
  spec.perturbation = {1.0, 2.0, 2.0, 0.0};
  const auto s = make_mosaic(spec);
  EXPECT_NEAR(overlap_score(s.tiles[0], s.tiles[1]), 0.5, 0.02);
}

TEST(Mosaic, DeterministicPerSeed) {
  MosaicSpec spec;
  spec.tile_size = 32;
  spec.perturbation = {2.0, 3.0, 3.0, 0.5};
  spec.nodata_fraction = 0.1;
  spec.noise_sigma = 0.2;
  const auto a = make_mosaic(spec), b = make_mosaic(spec);
  ASSERT_EQ(a.tiles.size(), 9u);
  for (std::size_t k = 0; k < 9; ++k) {
    EXPECT_EQ(read_all(a.tiles[k]), read_all(b.tiles[k]));
    EXPECT_EQ(a.true_poses[k].rotation(), b.true_poses[k].rotation());
  }
  spec.seed = 2;
  EXPECT_NE(read_all(make_mosaic(spec).tiles[4]), read_all(a.tiles[4]));
}

TEST(Mosaic, NodataFraction) {
  MosaicSpec spec;
  spec.rows = spec.cols = 1;
  spec.tile_size = 64;
  spec.nodata_fraction = 0.2;
  const auto s = make_mosaic(spec);
  const Window w = read_window(s.tiles[0], s.tiles[0].extent());
  EXPECT_NEAR(1.0 - double(w.valid_count()) / 4096.0, 0.2, 0.01);
}

TEST(Mosaic, TruePosesAlignTiles) {
  MosaicSpec spec;
  spec.rows = 1;
  spec.cols = 2;
  spec.tile_size = 48;
  spec.perturbation = {2.0, 3.0, 3.0, 0.5};
  const auto s = make_mosaic(spec);
  EXPECT_EQ(s.true_poses[0].rotation(), Eigen::Matrix3d::Identity());
  // Posing tile 1 by its true pose reproduces the terrain surface.
  const Point3 p = uv_to_world(20, 20, s.tiles[1].geotransform(), *height_at(s.tiles[1], 20, 20));
  const Point3 q = s.true_poses[1](p);
  GridSampler sampler(s.truth);
  const auto uv = world_to_uv(q.x(), q.y(), s.truth.geotransform());
  EXPECT_NEAR(q.z(), *sampler.bilinear(uv.u, uv.v), 0.5);
}

TEST(Mosaic, InvalidSpec) {
  MosaicSpec spec;
  spec.overlap = 1.5;
  EXPECT_THROW(make_mosaic(spec), DsmError);
  spec = {};
  spec.rows = 0;
  EXPECT_THROW(make_mosaic(spec), DsmError);
}

}  // namespace
}  // namespace dsmreg
