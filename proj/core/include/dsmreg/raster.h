#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsmreg/geotransform.h"

namespace dsmreg {

// Inclusive pixel rectangle.
struct PixelRect {
  std::int64_t u_min = 0;
  std::int64_t u_max = -1;
  std::int64_t v_min = 0;
  std::int64_t v_max = -1;

  bool empty() const { return u_max < u_min || v_max < v_min; }
  std::int64_t width() const { return empty() ? 0 : u_max - u_min + 1; }
  std::int64_t height() const { return empty() ? 0 : v_max - v_min + 1; }
  std::int64_t area() const { return width() * height(); }
  bool contains(std::int64_t u, std::int64_t v) const {
    return u >= u_min && u <= u_max && v >= v_min && v <= v_max;
  }
  bool operator==(const PixelRect&) const = default;
};

// Random-access backing store of a raster. Implementations must be safe to
// call concurrently from several threads.
class RasterSource {
 public:
  virtual ~RasterSource() = default;

  // Writes the raw stored values of `rect` (already clipped to the extent)
  // into `out`, row-major, north row first.
  virtual void read(const PixelRect& rect, std::span<double> out) const = 0;
};

// Counters shared by every copy of a DsmGrid handle.
struct ReadStats {
  std::atomic<std::int64_t> windows{0};
  std::atomic<std::int64_t> cells{0};
  std::atomic<std::int64_t> peak_window_cells{0};

  void record(std::int64_t window_cells);
  void reset();
};

// Materialized rectangular read. Heights of masked cells are unspecified.
struct Window {
  PixelRect rect;
  std::vector<double> heights;
  std::vector<std::uint8_t> valid;

  std::size_t index(std::int64_t u, std::int64_t v) const {
    return static_cast<std::size_t>((v - rect.v_min) * rect.width() + (u - rect.u_min));
  }
  bool valid_at(std::int64_t u, std::int64_t v) const { return valid[index(u, v)] != 0; }
  double at(std::int64_t u, std::int64_t v) const { return heights[index(u, v)]; }
  std::int64_t valid_count() const;
};

// Immutable handle to a georeferenced height raster. Copies are cheap and share
// the backing store; pixels are only pulled into memory through windowed reads.
class DsmGrid {
 public:
  DsmGrid(std::int64_t width, std::int64_t height, const GeoTransform& gt, double nodata,
          std::shared_ptr<const RasterSource> source, int id = 0, std::string path = {});

  std::int64_t width() const { return width_; }
  std::int64_t height() const { return height_; }
  std::int64_t pixel_count() const { return width_ * height_; }
  const GeoTransform& geotransform() const { return gt_; }
  double nodata() const { return nodata_; }
  int id() const { return id_; }
  const std::string& path() const { return path_; }
  PixelRect extent() const { return {0, width_ - 1, 0, height_ - 1}; }
  const RasterSource& source() const { return *source_; }

  DsmGrid with_id(int id) const;
  DsmGrid with_path(std::string path) const;

  bool is_nodata(double h) const { return std::isnan(h) || h == nodata_; }

  const ReadStats& stats() const { return *stats_; }
  void reset_stats() const { stats_->reset(); }
  void record_read(std::int64_t cells) const { stats_->record(cells); }

 private:
  std::int64_t width_;
  std::int64_t height_;
  GeoTransform gt_;
  double nodata_;
  std::shared_ptr<const RasterSource> source_;
  std::shared_ptr<ReadStats> stats_;
  int id_;
  std::string path_;
};

// Clips `rect` to the raster and reads it. Memory is proportional to the
// clipped area. Throws OutOfBounds when `rect` is empty or disjoint.
Window read_window(const DsmGrid& grid, const PixelRect& rect);

// Single pixel; nullopt when outside the extent or nodata.
std::optional<double> height_at(const DsmGrid& grid, std::int64_t u, std::int64_t v);

PixelRect clip_to_extent(const DsmGrid& grid, const PixelRect& rect);

// Rasters held fully in memory (results of resampling, tests, fused output).
DsmGrid make_memory_grid(std::int64_t width, std::int64_t height, const GeoTransform& gt,
                         double nodata, std::vector<double> heights, int id = 0);

using HeightFunction = std::function<double(std::int64_t u, std::int64_t v)>;

// Rasters whose heights are computed on demand. Lets tests and benchmarks use
// rasters of 10^8+ pixels without materializing them.
DsmGrid make_procedural_grid(std::int64_t width, std::int64_t height, const GeoTransform& gt,
                             double nodata, HeightFunction fn, int id = 0);

// Copies every pixel into memory, row band by row band.
std::vector<double> read_all(const DsmGrid& grid);

// Bounded row cache for scan-order point sampling (resampling and metrics).
// Keeps at most `max_rows` raster rows resident.
class GridSampler {
 public:
  explicit GridSampler(const DsmGrid& grid, std::size_t max_rows = 16);

  const DsmGrid& grid() const { return grid_; }

  std::optional<double> pixel(std::int64_t u, std::int64_t v);

  // Bilinear interpolation over the valid members of the 2x2 neighborhood,
  // renormalizing weights. Coordinates within 1e-9 px of a pixel center snap
  // to it. Valid footprint: [-0.5, W-0.5) x [-0.5, H-0.5).
  std::optional<double> bilinear(double u, double v);

  // Nearest pixel (round-half-up) lookup.
  std::optional<double> nearest(double u, double v);

 private:
  const std::vector<double>& row(std::int64_t v);

  DsmGrid grid_;
  std::size_t max_rows_;
  std::vector<std::int64_t> row_ids_;
  std::vector<std::vector<double>> rows_;
  std::size_t next_slot_ = 0;
};

}  // namespace dsmreg
