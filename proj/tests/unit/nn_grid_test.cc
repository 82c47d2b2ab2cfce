#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dsmreg/errors.h"
#include "dsmreg/nn_grid.h"
#include "testing/fixtures.h"

namespace dsmreg {
namespace {

using testing::grid_from;
using testing::kNodata;

DsmGrid flat(std::int64_t n, double h) { return grid_from(n, n, std::vector<double>(n * n, h)); }

TEST(InitialBound, CoincidentHeights) {
  const auto g = flat(11, 10.0);
  // unit_transform: x = u, y = -v.
  const Point3 q(5, -5, 10);
  const auto b = initial_bound(q, g);
  EXPECT_EQ(b.center_u, 5);
  EXPECT_EQ(b.center_v, 5);
  EXPECT_EQ(b.radius, 0.0);
  EXPECT_EQ(b.rect, (PixelRect{5, 5, 5, 5}));
  const auto r = nn_search(q, g, b);
  EXPECT_EQ(r.distance, 0.0);
  EXPECT_EQ(r.candidates_scanned, 1);
  EXPECT_EQ(r.u, 5);
  EXPECT_EQ(r.v, 5);
}

TEST(InitialBound, HeightDifferenceSetsRadius) {
  const auto g = flat(21, 7.0);
  const auto b = initial_bound(Point3(10, -10, 10), g);
  EXPECT_EQ(b.radius, 3.0);
  EXPECT_EQ(b.rect, (PixelRect{7, 13, 7, 13}));
}

TEST(InitialBound, RingFallbackUsesFull3dDistance) {
  std::vector<double> h(11 * 11, kNodata);
  h[5 * 11 + 7] = 9.0;  // 2 px east of (5, 5)
  const auto g = grid_from(11, 11, h);
  const auto b = initial_bound(Point3(5, -5, 10), g);
  EXPECT_EQ(b.anchor_u, 7);
  EXPECT_EQ(b.anchor_v, 5);
  EXPECT_DOUBLE_EQ(b.radius, std::sqrt(5.0));
  const auto r = nn_search(Point3(5, -5, 10), g, b);
  EXPECT_EQ(r.u, 7);
  EXPECT_DOUBLE_EQ(r.distance, std::sqrt(5.0));
}

TEST(InitialBound, OffExtentIsNoOverlap) {
  const auto g = flat(5, 0.0);
  try {
    find_nearest(Point3(50, 0, 0), g);
    FAIL();
  } catch (const DsmError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoOverlap);
  }
}

TEST(InitialBound, RingExhaustedIsAllNodata) {
  std::vector<double> h(200 * 200, kNodata);
  h[0] = 1.0;
  const auto g = grid_from(200, 200, h);
  NnOptions opt;
  opt.max_ring_radius = 10;
  try {
    initial_bound(Point3(150, -150, 0), g, opt);
    FAIL();
  } catch (const DsmError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAllNodata);
  }
  opt.max_ring_radius = 200;
  EXPECT_EQ(find_nearest(Point3(150, -150, 0), g, opt).u, 0);
}

TEST(InitialBound, AnisotropicRectCoversFinerAxis) {
  GeoTransform gt = testing::unit_transform(0, 0, 1.0);
  gt.y_scale = -0.5;
  const auto g = grid_from(41, 41, std::vector<double>(41 * 41, 0.0), gt);
  const auto b = initial_bound(Point3(20, -10, 3), g);
  // 3 m covers 3 columns but 6 rows; the square uses the larger count.
  EXPECT_EQ(b.rect.width(), 2 * 6 + 1);
  EXPECT_EQ(b.rect.height(), 2 * 6 + 1);
}

TEST(BruteForce, SingleValidPixel) {
  std::vector<double> h(9, kNodata);
  h[7] = 2.0;
  const auto r = brute_force_nn(Point3(0, 0, 0), grid_from(3, 3, h));
  EXPECT_EQ(r.u, 1);
  EXPECT_EQ(r.v, 2);
}

TEST(BruteForce, FlatAtPixelCenter) {
  const auto r = brute_force_nn(Point3(2, -3, 0), flat(5, 0.0));
  EXPECT_EQ(r.distance, 0.0);
  EXPECT_EQ(r.u, 2);
  EXPECT_EQ(r.v, 3);
}

TEST(BruteForce, AllNodata) {
  EXPECT_THROW(brute_force_nn(Point3(0, 0, 0), grid_from(2, 2, std::vector<double>(4, kNodata))),
               DsmError);
}

TEST(BruteForce, TiesGoToSmallestRowThenColumn) {
  // Query equidistant from (1,0), (0,1), (2,1) and (1,2).
  const auto g = flat(3, 0.0);
  const auto r = brute_force_nn(Point3(1, -1, 1), grid_from(3, 3, {0, 0, 0, 0, kNodata, 0, 0, 0, 0}));
  EXPECT_EQ(r.v, 0);
  EXPECT_EQ(r.u, 1);
  const auto s = find_nearest(Point3(1, -1, 1), grid_from(3, 3, {0, 0, 0, 0, kNodata, 0, 0, 0, 0}));
  EXPECT_EQ(s.v, 0);
  EXPECT_EQ(s.u, 1);
  (void)g;
}

TEST(BruteForce, MatchesIndependentDoubleLoop) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> h(49);
  for (auto& x : h) x = unit(rng) < 0.2 ? kNodata : 5.0 * unit(rng);
  h[24] = 1.0;
  testing::RandomRaster r{7, 7, testing::unit_transform(), h};
  const auto g = grid_from(7, 7, h);
  for (int k = 0; k < 50; ++k) {
    const Point3 q(7 * unit(rng) - 0.5, -(7 * unit(rng) - 0.5), 6 * unit(rng) - 0.5);
    const auto a = brute_force_nn(q, g);
    const auto o = testing::oracle_nearest(q, r);
    EXPECT_EQ(a.distance, o.distance);
    EXPECT_EQ(a.u, o.u);
    EXPECT_EQ(a.v, o.v);
  }
}

TEST(NnSearch, MatchesBruteForceOnFiveByFive) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> h(25);
  for (auto& x : h) x = 10.0 * unit(rng);
  const auto g = grid_from(5, 5, h);
  for (int k = 0; k < 100; ++k) {
    const Point3 q(5 * unit(rng) - 0.5, -(5 * unit(rng) - 0.5), 12 * unit(rng) - 1);
    const auto bound = initial_bound(q, g);
    const auto a = nn_search(q, g, bound);
    const auto b = brute_force_nn(q, g);
    EXPECT_EQ(a.distance, b.distance);
    EXPECT_EQ(a.u, b.u);
    EXPECT_EQ(a.v, b.v);
    EXPECT_EQ(a.ref_point, b.ref_point);
    EXPECT_LE(a.distance, bound.radius);
    EXPECT_LE(a.candidates_scanned, bound.rect.area());
  }
}

TEST(NnSearch, RandomRastersMatchOracle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 30; ++t) {
    const auto r = testing::random_raster(rng, 48);
    const auto g = grid_from(r.width, r.height, r.heights, r.gt);
    for (int k = 0; k < 40; ++k) {
      const Point3 w = uv_to_world(unit(rng) * r.width - 0.5, unit(rng) * r.height - 0.5, r.gt,
                                   25.0 * unit(rng) - 2.5);
      const auto a = find_nearest(w, g);
      const auto o = testing::oracle_nearest(w, r);
      ASSERT_EQ(a.distance, o.distance);
      ASSERT_EQ(a.u, o.u);
      ASSERT_EQ(a.v, o.v);
    }
  }
}

TEST(NnSearch, SkewedTransformMatchesOracle) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto r = testing::random_raster(rng, 30);
  r.gt.x_skew = 0.3;
  r.gt.y_skew = 0.2;
  const auto g = grid_from(r.width, r.height, r.heights, r.gt);
  for (int k = 0; k < 200; ++k) {
    const Point3 w = uv_to_world(unit(rng) * r.width - 0.5, unit(rng) * r.height - 0.5, r.gt,
                                 25.0 * unit(rng));
    const auto a = find_nearest(w, g);
    const auto o = testing::oracle_nearest(w, r);
    ASSERT_EQ(a.distance, o.distance);
    ASSERT_EQ(a.u, o.u);
    ASSERT_EQ(a.v, o.v);
  }
}

TEST(NnSearch, WindowMemoryTracksCandidates) {
  auto g = make_procedural_grid(1'000'000, 1'000'000, testing::unit_transform(), kNodata,
                                [](std::int64_t u, std::int64_t v) { return 0.01 * double((u * 7 + v * 3) % 11); });
  g.reset_stats();
  const auto r = find_nearest(Point3(500'000.2, -400'000.4, 2.0), g);
  EXPECT_LE(g.stats().peak_window_cells.load(), r.candidates_scanned);
  EXPECT_LE(r.candidates_scanned, 49);
}

TEST(NnSearch, SmallerResidualsScanFewerCandidates) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto g = flat(101, 0.0);
  double a_total = 0.0, b_total = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double x = 20 + 60 * unit(rng), y = -(20 + 60 * unit(rng));
    const double res = 5.0 * unit(rng);
    a_total += find_nearest(Point3(x, y, res), g).candidates_scanned;
    b_total += find_nearest(Point3(x, y, 0.5 * res), g).candidates_scanned;
  }
  EXPECT_LE(b_total, a_total);
}

}  // namespace
}  // namespace dsmreg
