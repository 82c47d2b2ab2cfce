#pragma once

#include <cstdint>

#include "dsmreg/geotransform.h"
#include "dsmreg/raster.h"

namespace dsmreg {

// Exact 3D nearest-neighbor search into a reference DSM without a spatial
// index. The pixel co-located with the query gives a point whose distance d
// bounds the true nearest neighbor; only the pixels whose horizontal footprint
// can lie within d of the query are read.

struct NnOptions {
  // Ring-scan radius (pixels) used to find a valid anchor when the co-located
  // pixel is nodata.
  int max_ring_radius = 64;
};

struct SearchBound {
  // Pixel of the reference at the query's horizontal position (rounded).
  std::int64_t center_u = 0;
  std::int64_t center_v = 0;
  // Valid pixel whose point defines the radius. Equals the center pixel unless
  // that pixel is nodata.
  std::int64_t anchor_u = 0;
  std::int64_t anchor_v = 0;
  double anchor_height = 0.0;
  // Distance from the query to the anchor point; the nearest neighbor lies
  // within it.
  double radius = 0.0;
  // Square of side 2*ceil(radius * pixels_per_meter) + 1 around the center,
  // not yet clipped to the raster.
  PixelRect rect;
};

struct NnResult {
  Point3 ref_point = Point3::Zero();
  std::int64_t u = 0;
  std::int64_t v = 0;
  double distance = 0.0;
  std::int64_t candidates_scanned = 0;
};

// Throws NoOverlap when the query projects outside the reference and AllNodata
// when the ring scan finds no valid pixel.
SearchBound initial_bound(const Point3& query, const DsmGrid& ref, const NnOptions& options = {});

// Scans the (clipped) bound rectangle. Ties go to the smallest (v, u).
// Throws AllNodata when the rectangle holds no valid pixel.
NnResult nn_search(const Point3& query, const DsmGrid& ref, const SearchBound& bound);

// initial_bound followed by nn_search.
NnResult find_nearest(const Point3& query, const DsmGrid& ref, const NnOptions& options = {});

// Exhaustive scan of every valid pixel, same tie-break. Test-scale rasters only.
NnResult brute_force_nn(const Point3& query, const DsmGrid& ref);

// Euclidean distance used by every search path, so results compare bit-exactly.
inline double point_distance(const Point3& a, const Point3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace dsmreg
