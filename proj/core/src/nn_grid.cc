#include "dsmreg/nn_grid.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fmt/format.h>

#include "dsmreg/errors.h"

namespace dsmreg {

namespace {

struct Best {
  double distance = std::numeric_limits<double>::infinity();
  std::int64_t u = -1;
  std::int64_t v = -1;
  double h = 0.0;

  bool found() const { return u >= 0; }

  // Callers visit pixels in increasing (v, u) within a window, but ring strips
  // are visited out of order, hence the explicit tie-break.
  void offer(double d, std::int64_t pu, std::int64_t pv, double ph) {
    if (d < distance || (d == distance && (pv < v || (pv == v && pu < u)))) {
      distance = d;
      u = pu;
      v = pv;
      h = ph;
    }
  }
};

void scan_window(const Point3& query, const DsmGrid& ref, const Window& w, Best& best) {
  const GeoTransform& gt = ref.geotransform();
  for (std::int64_t v = w.rect.v_min; v <= w.rect.v_max; ++v) {
    for (std::int64_t u = w.rect.u_min; u <= w.rect.u_max; ++u) {
      const std::size_t i = w.index(u, v);
      if (!w.valid[i]) continue;
      const double h = w.heights[i];
      best.offer(point_distance(query, uv_to_world(static_cast<double>(u), static_cast<double>(v),
                                                   gt, h)),
                 u, v, h);
    }
  }
}

std::int64_t half_width_pixels(const DsmGrid& ref, double radius) {
  const GeoTransform& gt = ref.geotransform();
  const double per_meter = std::max(gt.u_extent_per_meter(), gt.v_extent_per_meter());
  const double half = std::ceil(radius * per_meter);
  const double cap = static_cast<double>(ref.width() + ref.height());
  return static_cast<std::int64_t>(std::min(half, cap));
}

NnResult make_result(const DsmGrid& ref, const Best& best, std::int64_t scanned) {
  NnResult r;
  r.u = best.u;
  r.v = best.v;
  r.ref_point = uv_to_world(static_cast<double>(best.u), static_cast<double>(best.v),
                            ref.geotransform(), best.h);
  r.distance = best.distance;
  r.candidates_scanned = scanned;
  return r;
}

}  // namespace

SearchBound initial_bound(const Point3& query, const DsmGrid& ref, const NnOptions& options) {
  const PixelCoord uv = world_to_uv(query.x(), query.y(), ref.geotransform());
  const double fu = std::floor(uv.u + 0.5);
  const double fv = std::floor(uv.v + 0.5);
  if (!std::isfinite(fu) || !std::isfinite(fv) || fu < 0 || fv < 0 ||
      fu > static_cast<double>(ref.width() - 1) || fv > static_cast<double>(ref.height() - 1)) {
    throw DsmError(ErrorCode::kNoOverlap,
                   fmt::format("query ({:.3f}, {:.3f}) projects outside the reference raster",
                               query.x(), query.y()));
  }
  SearchBound bound;
  bound.center_u = static_cast<std::int64_t>(fu);
  bound.center_v = static_cast<std::int64_t>(fv);

  Best best;
  if (const auto h = height_at(ref, bound.center_u, bound.center_v)) {
    best.offer(point_distance(query, uv_to_world(fu, fv, ref.geotransform(), *h)),
               bound.center_u, bound.center_v, *h);
  } else {
    // Outward ring scan; the first ring holding a valid pixel supplies the
    // closest (3D) of its valid pixels.
    const PixelRect extent = ref.extent();
    for (int r = 1; r <= options.max_ring_radius && !best.found(); ++r) {
      const std::int64_t u0 = bound.center_u - r, u1 = bound.center_u + r;
      const std::int64_t v0 = bound.center_v - r, v1 = bound.center_v + r;
      if (u0 < 0 && v0 < 0 && u1 > extent.u_max && v1 > extent.v_max) break;
      const PixelRect strips[4] = {
          {u0, u1, v0, v0}, {u0, u1, v1, v1}, {u0, u0, v0 + 1, v1 - 1}, {u1, u1, v0 + 1, v1 - 1}};
      for (const PixelRect& s : strips) {
        if (clip_to_extent(ref, s).empty()) continue;
        scan_window(query, ref, read_window(ref, s), best);
      }
    }
    if (!best.found()) {
      throw DsmError(ErrorCode::kAllNodata,
                     fmt::format("no valid reference pixel within {} px of ({}, {})",
                                 options.max_ring_radius, bound.center_u, bound.center_v));
    }
  }
  bound.anchor_u = best.u;
  bound.anchor_v = best.v;
  bound.anchor_height = best.h;
  bound.radius = best.distance;
  const std::int64_t half = half_width_pixels(ref, bound.radius);
  bound.rect = {bound.center_u - half, bound.center_u + half, bound.center_v - half,
                bound.center_v + half};
  return bound;
}

NnResult nn_search(const Point3& query, const DsmGrid& ref, const SearchBound& bound) {
  const Window w = read_window(ref, bound.rect);
  Best best;
  scan_window(query, ref, w, best);
  if (!best.found()) {
    throw DsmError(ErrorCode::kAllNodata, "every pixel in the search rectangle is nodata");
  }
  return make_result(ref, best, w.rect.area());
}

NnResult find_nearest(const Point3& query, const DsmGrid& ref, const NnOptions& options) {
  return nn_search(query, ref, initial_bound(query, ref, options));
}

NnResult brute_force_nn(const Point3& query, const DsmGrid& ref) {
  Best best;
  for (std::int64_t v = 0; v < ref.height(); ++v) {
    scan_window(query, ref, read_window(ref, {0, ref.width() - 1, v, v}), best);
  }
  if (!best.found()) throw DsmError(ErrorCode::kAllNodata, "reference raster has no valid pixel");
  return make_result(ref, best, ref.pixel_count());
}

}  // namespace dsmreg
