#include "dsmreg/fusion.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <fmt/format.h>

#include "dsmreg/errors.h"

namespace dsmreg {

namespace {

constexpr int kFixedPointIterations = 8;

struct Bounds {
  double min_x = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();

  void add(const Point3& p) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  }
  void add(const Bounds& b) {
    min_x = std::min(min_x, b.min_x);
    max_x = std::max(max_x, b.max_x);
    min_y = std::min(min_y, b.min_y);
    max_y = std::max(max_y, b.max_y);
  }
};

Bounds posed_bounds(const DsmGrid& grid, const RigidTransform& pose) {
  Bounds b;
  const double u1 = static_cast<double>(grid.width()) - 0.5;
  const double v1 = static_cast<double>(grid.height()) - 0.5;
  for (const auto& [u, v] : {std::pair{-0.5, -0.5}, {u1, -0.5}, {-0.5, v1}, {u1, v1}})
    b.add(pose(uv_to_world(u, v, grid.geotransform())));
  return b;
}

double pixel_size(const DsmGrid& g) {
  return std::sqrt(std::abs(g.geotransform().determinant()));
}

Lattice lattice_for(const Bounds& b, double gsd) {
  // Absorb rounding when the extent is an exact multiple of gsd.
  auto cells = [gsd](double extent) {
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(extent / gsd - 1e-6)));
  };
  Lattice l;
  l.gt.x_scale = gsd;
  l.gt.y_scale = -gsd;
  l.gt.x_origin = b.min_x + 0.5 * gsd;
  l.gt.y_origin = b.max_y - 0.5 * gsd;
  l.width = cells(b.max_x - b.min_x);
  l.height = cells(b.max_y - b.min_y);
  return l;
}

}  // namespace

Lattice posed_lattice(const DsmGrid& grid, const RigidTransform& pose, double gsd) {
  return lattice_for(posed_bounds(grid, pose), gsd > 0.0 ? gsd : pixel_size(grid));
}

DsmGrid apply_pose(const DsmGrid& grid, const RigidTransform& pose, const Lattice& target) {
  const RigidTransform inverse = pose.inverse();
  const GeoTransform& src_gt = grid.geotransform();
  GridSampler sampler(grid, 64);
  std::vector<double> out(static_cast<std::size_t>(target.width * target.height),
                          kDefaultNodata);
  std::int64_t filled = 0;
  for (std::int64_t v = 0; v < target.height; ++v) {
    for (std::int64_t u = 0; u < target.width; ++u) {
      const Point3 center =
          uv_to_world(static_cast<double>(u), static_cast<double>(v), target.gt);
      double z = 0.0;
      std::optional<double> posed;
      for (int k = 0; k < kFixedPointIterations; ++k) {
        const Point3 s = inverse(Point3(center.x(), center.y(), z));
        const PixelCoord uv = world_to_uv(s.x(), s.y(), src_gt);
        const auto h = sampler.bilinear(uv.u, uv.v);
        if (!h) {
          posed.reset();
          break;
        }
        const double next = pose(Point3(s.x(), s.y(), *h)).z();
        const bool settled = posed && std::abs(next - z) <= 1e-9 * (1.0 + std::abs(next));
        posed = next;
        z = next;
        if (settled) break;
      }
      if (posed) {
        out[static_cast<std::size_t>(v * target.width + u)] = *posed;
        ++filled;
      }
    }
  }
  if (filled == 0) {
    throw DsmError(ErrorCode::kEmptyResult, "posed raster does not cover any target pixel");
  }
  return make_memory_grid(target.width, target.height, target.gt, kDefaultNodata,
                          std::move(out), grid.id());
}

FusedDsm fuse(std::span<const DsmGrid> dsms, std::span<const RigidTransform> poses,
              double target_gsd) {
  if (dsms.empty() || dsms.size() != poses.size()) {
    throw DsmError(ErrorCode::kInvalidArgument, "fuse needs one pose per raster and >= 1 raster");
  }
  double gsd = target_gsd;
  if (gsd <= 0.0) {
    gsd = std::numeric_limits<double>::infinity();
    for (const auto& g : dsms) gsd = std::min(gsd, pixel_size(g));
  }
  Bounds all;
  for (std::size_t k = 0; k < dsms.size(); ++k) all.add(posed_bounds(dsms[k], poses[k]));
  const Lattice lattice = lattice_for(all, gsd);

  // Each raster is resampled onto the part of the union lattice it covers.
  struct Piece {
    std::int64_t u0, v0;
    std::optional<DsmGrid> grid;
    std::vector<double> heights;
  };
  std::vector<Piece> pieces;
  for (std::size_t k = 0; k < dsms.size(); ++k) {
    const Bounds b = posed_bounds(dsms[k], poses[k]);
    const PixelCoord lo = world_to_uv(b.min_x, b.max_y, lattice.gt);
    const PixelCoord hi = world_to_uv(b.max_x, b.min_y, lattice.gt);
    const auto u0 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(lo.u)), 0,
                                             lattice.width - 1);
    const auto v0 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(lo.v)), 0,
                                             lattice.height - 1);
    const auto u1 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::ceil(hi.u)), 0,
                                             lattice.width - 1);
    const auto v1 = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::ceil(hi.v)), 0,
                                             lattice.height - 1);
    Lattice sub{lattice.gt, u1 - u0 + 1, v1 - v0 + 1};
    sub.gt.x_origin = lattice.gt.x_origin + lattice.gt.x_scale * static_cast<double>(u0);
    sub.gt.y_origin = lattice.gt.y_origin + lattice.gt.y_scale * static_cast<double>(v0);
    Piece piece{u0, v0, std::nullopt, {}};
    try {
      piece.grid = apply_pose(dsms[k], poses[k], sub);
      piece.heights = read_all(*piece.grid);
    } catch (const DsmError& e) {
      if (e.code() != ErrorCode::kEmptyResult) throw;
    }
    if (piece.grid) pieces.push_back(std::move(piece));
  }

  const auto n = static_cast<std::size_t>(lattice.width * lattice.height);
  std::vector<double> fused(n, kDefaultNodata);
  std::vector<double> counts(n, 0.0);
  std::vector<double> values;
  std::int64_t filled = 0;
  for (std::int64_t v = 0; v < lattice.height; ++v) {
    for (std::int64_t u = 0; u < lattice.width; ++u) {
      values.clear();
      for (const Piece& p : pieces) {
        const std::int64_t pu = u - p.u0;
        const std::int64_t pv = v - p.v0;
        if (pu < 0 || pv < 0 || pu >= p.grid->width() || pv >= p.grid->height()) continue;
        const double h = p.heights[static_cast<std::size_t>(pv * p.grid->width() + pu)];
        if (!p.grid->is_nodata(h)) values.push_back(h);
      }
      if (values.empty()) continue;
      std::sort(values.begin(), values.end());
      const std::size_t mid = values.size() / 2;
      const double median =
          values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
      const auto idx = static_cast<std::size_t>(v * lattice.width + u);
      fused[idx] = median;
      counts[idx] = static_cast<double>(values.size());
      ++filled;
    }
  }
  if (filled == 0) throw DsmError(ErrorCode::kEmptyResult, "no raster contributes to the fusion");
  return {make_memory_grid(lattice.width, lattice.height, lattice.gt, kDefaultNodata,
                           std::move(fused)),
          make_memory_grid(lattice.width, lattice.height, lattice.gt, -1.0, std::move(counts))};
}

}  // namespace dsmreg
