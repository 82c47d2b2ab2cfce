#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "dsmreg/errors.h"
#include "dsmreg/raster_io.h"
#include "testing/fixtures.h"

namespace dsmreg {
namespace {

namespace fs = std::filesystem;
using testing::kNodata;

class RasterIoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("dsmreg_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write_text(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
  }

  fs::path dir_;
};

DsmGrid sample_grid(const GeoTransform& gt) {
  std::vector<double> h = {1.5, 2.25, kNodata, 4.0,  -0.1, 1e-7, 3.0, 1.0 / 3.0,
                           8.0, 9.5,  10.0,    11.0, 0.0,  kNodata, 14.125, 15.0};
  return testing::grid_from(4, 4, h, gt);
}

TEST_F(RasterIoTest, AsciiRoundTrip) {
  const auto gt = testing::unit_transform(100.5, 203.5, 0.5);
  const auto g = sample_grid(gt);
  write_dsm(g, path("a.asc"));
  EXPECT_FALSE(fs::exists(path("a.wld")));
  const auto back = load_dsm(path("a.asc"));
  EXPECT_EQ(back.width(), 4);
  EXPECT_EQ(back.height(), 4);
  EXPECT_EQ(back.geotransform(), gt);
  EXPECT_EQ(back.nodata(), kNodata);
  EXPECT_EQ(read_all(back), read_all(g));
}

TEST_F(RasterIoTest, BinaryRoundTripBitExact) {
  GeoTransform gt = testing::unit_transform(-3.0, 7.0, 0.35);
  gt.x_skew = 0.01;
  gt.y_skew = -0.02;
  const auto g = sample_grid(gt);
  write_dsm(g, path("a.dsmg"));
  EXPECT_EQ(fs::file_size(path("a.dsmg")), kBinaryHeaderBytes + 16 * sizeof(double));
  const auto back = load_dsm(path("a.dsmg"));
  EXPECT_EQ(back.geotransform(), gt);
  const auto a = read_all(g), b = read_all(back);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
}

TEST_F(RasterIoTest, AsciiWithSkewWritesWorldFile) {
  GeoTransform gt = testing::unit_transform(10.0, 20.0, 1.0);
  gt.x_skew = 0.25;
  const auto g = sample_grid(gt);
  write_dsm(g, path("s.asc"));
  ASSERT_TRUE(fs::exists(path("s.wld")));
  const auto back = load_dsm(path("s.asc"));
  EXPECT_EQ(back.geotransform(), gt);
}

TEST_F(RasterIoTest, AsciiNodataMasked) {
  write_text("n.asc",
             "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 2\nNODATA_value -9999\n"
             "1 -9999 3\n4 5 -9999\n");
  const auto g = load_dsm(path("n.asc"));
  const Window w = read_window(g, g.extent());
  EXPECT_EQ(w.valid_count(), 4);
  EXPECT_FALSE(w.valid_at(1, 0));
  EXPECT_FALSE(w.valid_at(2, 1));
  EXPECT_EQ(w.at(0, 1), 4.0);
  // Corner anchoring converted to pixel centers; north row first.
  EXPECT_DOUBLE_EQ(g.geotransform().x_origin, 1.0);
  EXPECT_DOUBLE_EQ(g.geotransform().y_origin, 3.0);
  EXPECT_DOUBLE_EQ(g.geotransform().y_scale, -2.0);
}

TEST_F(RasterIoTest, WorldFileLineOrder) {
  write_text("w.wld", "0.5\n0.01\n-0.02\n-0.75\n1000.25\n2000.5\n");
  const auto gt = read_world_file(path("w.wld"));
  EXPECT_EQ(gt.x_scale, 0.5);
  EXPECT_EQ(gt.y_skew, 0.01);
  EXPECT_EQ(gt.x_skew, -0.02);
  EXPECT_EQ(gt.y_scale, -0.75);
  EXPECT_EQ(gt.x_origin, 1000.25);
  EXPECT_EQ(gt.y_origin, 2000.5);

  write_world_file(gt, path("w2.wld"));
  EXPECT_EQ(read_world_file(path("w2.wld")), gt);
}

TEST_F(RasterIoTest, WorldFileOverridesHeader) {
  write_text("g.asc", "ncols 2\nnrows 2\nxllcenter 0\nyllcenter 0\ncellsize 1\n1 2\n3 4\n");
  write_text("g.wld", "0.5\n0\n0\n-0.5\n50\n60\n");
  const auto g = load_dsm(path("g.asc"));
  EXPECT_EQ(g.geotransform().x_origin, 50.0);
  EXPECT_EQ(g.geotransform().y_scale, -0.5);
  EXPECT_EQ(read_all(g), (std::vector<double>{1, 2, 3, 4}));
}

TEST_F(RasterIoTest, ParseErrorReportsLine) {
  write_text("bad.asc", "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3 x\n");
  try {
    const auto g = load_dsm(path("bad.asc"));
    read_all(g);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_EQ(e.line(), 7u);
    EXPECT_NE(std::string(e.what()).find("bad.asc"), std::string::npos);
  }
}

TEST_F(RasterIoTest, MissingHeaderKey) {
  write_text("h.asc", "ncols 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n");
  EXPECT_THROW(load_dsm(path("h.asc")), ParseError);
}

TEST_F(RasterIoTest, ShortBody) {
  write_text("s.asc", "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2\n3\n");
  EXPECT_THROW(read_all(load_dsm(path("s.asc"))), ParseError);
}

TEST_F(RasterIoTest, BadMagic) {
  write_text("m.dsmg", std::string(80, 'x'));
  EXPECT_THROW(load_dsm(path("m.dsmg")), ParseError);
}

TEST_F(RasterIoTest, UnsupportedFormat) {
  write_text("x.tif", "II*\0garbage");
  try {
    load_dsm(path("x.tif"));
    FAIL();
  } catch (const DsmError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnsupportedFormat);
  }
  EXPECT_THROW(parse_format_name("geotiff"), DsmError);
  EXPECT_EQ(parse_format_name("ascii"), RasterFormat::kAsciiGrid);
}

TEST_F(RasterIoTest, MissingFileIsIoError) {
  try {
    load_dsm(path("nope.asc"));
    FAIL();
  } catch (const DsmError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

TEST_F(RasterIoTest, AsciiRandomWindowsMatch) {
  std::mt19937_64 rng(3);
  auto r = testing::random_raster(rng, 40);
  const auto g = testing::grid_from(r.width, r.height, r.heights, r.gt);
  write_dsm(g, path("r.asc"));
  write_dsm(g, path("r.dsmg"));
  for (const auto* name : {"r.asc", "r.dsmg"}) {
    const auto back = load_dsm(path(name));
    std::uniform_int_distribution<std::int64_t> pu(0, r.width - 1), pv(0, r.height - 1);
    for (int k = 0; k < 20; ++k) {
      std::int64_t u0 = pu(rng), u1 = pu(rng), v0 = pv(rng), v1 = pv(rng);
      const PixelRect rect{std::min(u0, u1), std::max(u0, u1), std::min(v0, v1), std::max(v0, v1)};
      const Window a = read_window(g, rect), b = read_window(back, rect);
      EXPECT_EQ(a.valid, b.valid);
      for (std::size_t i = 0; i < a.heights.size(); ++i)
        if (a.valid[i]) EXPECT_EQ(a.heights[i], b.heights[i]);
    }
  }
}

}  // namespace
}  // namespace dsmreg
