#pragma once

#include <span>
#include <vector>

#include "dsmreg/raster.h"
#include "dsmreg/rigid_transform.h"

namespace dsmreg {

inline constexpr double kDefaultNodata = -9999.0;

struct Lattice {
  GeoTransform gt;
  std::int64_t width = 0;
  std::int64_t height = 0;
};

// North-up lattice of pixel size `gsd` covering the horizontal footprint of
// `grid` after `pose` (pose applied to the pixel-edge corners at h = 0).
// gsd <= 0 keeps the raster's own pixel size.
Lattice posed_lattice(const DsmGrid& grid, const RigidTransform& pose, double gsd = 0.0);

// Inverse-mapping resample of `grid` moved by `pose` onto `target`: for each
// target pixel center, the pose is inverted to find the source location, the
// source is sampled bilinearly, and the posed height is taken; a short fixed
// point iteration makes the posed point land on the target pixel center when
// the pose tilts. Throws EmptyResult.
DsmGrid apply_pose(const DsmGrid& grid, const RigidTransform& pose, const Lattice& target);

struct FusedDsm {
  DsmGrid grid;
  // Number of contributing rasters per pixel (0 where grid is nodata).
  DsmGrid contributors;
};

// Median of the posed rasters on the union lattice. gsd <= 0 uses the finest
// input pixel size. Throws EmptyResult.
FusedDsm fuse(std::span<const DsmGrid> dsms, std::span<const RigidTransform> poses,
              double target_gsd = 0.0);

}  // namespace dsmreg
