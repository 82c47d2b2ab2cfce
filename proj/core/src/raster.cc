#include "dsmreg/raster.h"

#include <algorithm>
#include <fmt/format.h>

#include "dsmreg/errors.h"

namespace dsmreg {

void ReadStats::record(std::int64_t window_cells) {
  windows.fetch_add(1, std::memory_order_relaxed);
  cells.fetch_add(window_cells, std::memory_order_relaxed);
  std::int64_t peak = peak_window_cells.load(std::memory_order_relaxed);
  while (window_cells > peak &&
         !peak_window_cells.compare_exchange_weak(peak, window_cells,
                                                  std::memory_order_relaxed)) {
  }
}

void ReadStats::reset() {
  windows = 0;
  cells = 0;
  peak_window_cells = 0;
}

std::int64_t Window::valid_count() const {
  return std::count(valid.begin(), valid.end(), std::uint8_t{1});
}

DsmGrid::DsmGrid(std::int64_t width, std::int64_t height, const GeoTransform& gt,
                 double nodata, std::shared_ptr<const RasterSource> source, int id,
                 std::string path)
    : width_(width),
      height_(height),
      gt_(gt),
      nodata_(nodata),
      source_(std::move(source)),
      stats_(std::make_shared<ReadStats>()),
      id_(id),
      path_(std::move(path)) {
  if (width_ < 1 || height_ < 1) {
    throw DsmError(ErrorCode::kInvalidArgument,
                   fmt::format("raster dimensions must be positive, got {}x{}", width_, height_));
  }
  if (!gt_.invertible()) {
    throw DsmError(ErrorCode::kSingularTransform, "raster geotransform is not invertible");
  }
  if (!source_) throw DsmError(ErrorCode::kInvalidArgument, "raster has no backing source");
}

DsmGrid DsmGrid::with_id(int id) const {
  DsmGrid copy = *this;
  copy.id_ = id;
  return copy;
}

DsmGrid DsmGrid::with_path(std::string path) const {
  DsmGrid copy = *this;
  copy.path_ = std::move(path);
  return copy;
}

PixelRect clip_to_extent(const DsmGrid& grid, const PixelRect& rect) {
  return {std::max<std::int64_t>(rect.u_min, 0), std::min(rect.u_max, grid.width() - 1),
          std::max<std::int64_t>(rect.v_min, 0), std::min(rect.v_max, grid.height() - 1)};
}

Window read_window(const DsmGrid& grid, const PixelRect& rect) {
  if (rect.empty()) throw DsmError(ErrorCode::kOutOfBounds, "requested window is empty");
  const PixelRect clipped = clip_to_extent(grid, rect);
  if (clipped.empty()) {
    throw DsmError(ErrorCode::kOutOfBounds,
                   fmt::format("window [{}:{}, {}:{}] is disjoint from the {}x{} raster",
                               rect.u_min, rect.u_max, rect.v_min, rect.v_max, grid.width(),
                               grid.height()));
  }
  Window w;
  w.rect = clipped;
  const auto n = static_cast<std::size_t>(clipped.area());
  w.heights.resize(n);
  grid.source().read(clipped, w.heights);
  w.valid.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.valid[i] = grid.is_nodata(w.heights[i]) ? 0 : 1;
  grid.record_read(clipped.area());
  return w;
}

std::optional<double> height_at(const DsmGrid& grid, std::int64_t u, std::int64_t v) {
  if (!grid.extent().contains(u, v)) return std::nullopt;
  double h = 0.0;
  grid.source().read({u, u, v, v}, std::span<double>(&h, 1));
  if (grid.is_nodata(h)) return std::nullopt;
  return h;
}

namespace {

class MemorySource final : public RasterSource {
 public:
  MemorySource(std::int64_t width, std::vector<double> heights)
      : width_(width), heights_(std::move(heights)) {}

  void read(const PixelRect& rect, std::span<double> out) const override {
    const std::int64_t w = rect.width();
    for (std::int64_t v = rect.v_min; v <= rect.v_max; ++v) {
      const auto* begin = heights_.data() + v * width_ + rect.u_min;
      std::copy(begin, begin + w, out.begin() + (v - rect.v_min) * w);
    }
  }

 private:
  std::int64_t width_;
  std::vector<double> heights_;
};

class ProceduralSource final : public RasterSource {
 public:
  explicit ProceduralSource(HeightFunction fn) : fn_(std::move(fn)) {}

  void read(const PixelRect& rect, std::span<double> out) const override {
    std::size_t i = 0;
    for (std::int64_t v = rect.v_min; v <= rect.v_max; ++v)
      for (std::int64_t u = rect.u_min; u <= rect.u_max; ++u) out[i++] = fn_(u, v);
  }

 private:
  HeightFunction fn_;
};

}  // namespace

DsmGrid make_memory_grid(std::int64_t width, std::int64_t height, const GeoTransform& gt,
                         double nodata, std::vector<double> heights, int id) {
  if (width < 1 || height < 1 || static_cast<std::int64_t>(heights.size()) != width * height) {
    throw DsmError(ErrorCode::kInvalidArgument,
                   fmt::format("height buffer of {} values does not match {}x{}",
                               heights.size(), width, height));
  }
  return DsmGrid(width, height, gt, nodata,
                 std::make_shared<MemorySource>(width, std::move(heights)), id);
}

DsmGrid make_procedural_grid(std::int64_t width, std::int64_t height, const GeoTransform& gt,
                             double nodata, HeightFunction fn, int id) {
  return DsmGrid(width, height, gt, nodata, std::make_shared<ProceduralSource>(std::move(fn)),
                 id);
}

std::vector<double> read_all(const DsmGrid& grid) {
  std::vector<double> out(static_cast<std::size_t>(grid.pixel_count()));
  const std::int64_t band = std::max<std::int64_t>(1, (1 << 20) / grid.width());
  for (std::int64_t v = 0; v < grid.height(); v += band) {
    const PixelRect rect{0, grid.width() - 1, v, std::min(v + band, grid.height()) - 1};
    grid.source().read(rect, std::span<double>(out.data() + v * grid.width(),
                                               static_cast<std::size_t>(rect.area())));
  }
  return out;
}

GridSampler::GridSampler(const DsmGrid& grid, std::size_t max_rows)
    : grid_(grid), max_rows_(std::max<std::size_t>(max_rows, 2)) {}

const std::vector<double>& GridSampler::row(std::int64_t v) {
  for (std::size_t i = 0; i < row_ids_.size(); ++i)
    if (row_ids_[i] == v) return rows_[i];
  std::size_t slot;
  if (rows_.size() < max_rows_) {
    slot = rows_.size();
    rows_.emplace_back(static_cast<std::size_t>(grid_.width()));
    row_ids_.push_back(v);
  } else {
    slot = next_slot_;
    next_slot_ = (next_slot_ + 1) % max_rows_;
    row_ids_[slot] = v;
  }
  grid_.source().read({0, grid_.width() - 1, v, v}, rows_[slot]);
  return rows_[slot];
}

std::optional<double> GridSampler::pixel(std::int64_t u, std::int64_t v) {
  if (!grid_.extent().contains(u, v)) return std::nullopt;
  const double h = row(v)[static_cast<std::size_t>(u)];
  if (grid_.is_nodata(h)) return std::nullopt;
  return h;
}

std::optional<double> GridSampler::nearest(double u, double v) {
  if (!std::isfinite(u) || !std::isfinite(v)) return std::nullopt;
  return pixel(static_cast<std::int64_t>(std::floor(u + 0.5)),
               static_cast<std::int64_t>(std::floor(v + 0.5)));
}

std::optional<double> GridSampler::bilinear(double u, double v) {
  constexpr double kSnap = 1e-9;
  if (!std::isfinite(u) || !std::isfinite(v)) return std::nullopt;
  if (u < -0.5 || v < -0.5 || u >= grid_.width() - 0.5 || v >= grid_.height() - 0.5)
    return std::nullopt;
  if (std::abs(u - std::round(u)) < kSnap) u = std::round(u);
  if (std::abs(v - std::round(v)) < kSnap) v = std::round(v);

  // The pixel whose footprint holds the sample must itself be valid.
  if (!nearest(u, v)) return std::nullopt;

  const auto u0 = static_cast<std::int64_t>(std::floor(u));
  const auto v0 = static_cast<std::int64_t>(std::floor(v));
  const double fu = u - static_cast<double>(u0);
  const double fv = v - static_cast<double>(v0);
  const double weights[4] = {(1 - fu) * (1 - fv), fu * (1 - fv), (1 - fu) * fv, fu * fv};
  const std::int64_t du[4] = {0, 1, 0, 1};
  const std::int64_t dv[4] = {0, 0, 1, 1};

  double sum = 0.0;
  double wsum = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (weights[k] == 0.0) continue;
    const auto h = pixel(u0 + du[k], v0 + dv[k]);
    if (!h) continue;
    sum += weights[k] * *h;
    wsum += weights[k];
  }
  if (wsum <= 0.0) return std::nullopt;
  if (wsum == 1.0) return sum;
  return sum / wsum;
}

}  // namespace dsmreg
