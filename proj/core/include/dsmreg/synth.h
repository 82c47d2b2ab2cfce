#pragma once

#include <cstdint>
#include <vector>

#include "dsmreg/fusion.h"
#include "dsmreg/raster.h"
#include "dsmreg/rigid_transform.h"

namespace dsmreg {

// SplitMix64; fully specified so generated data is reproducible anywhere.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  double normal();                         // standard normal (Box-Muller)

 private:
  std::uint64_t state_;
};

// Diamond-square heightfield on a (2^levels + 1)^2 lattice, row-major.
// roughness is the per-octave amplitude decay exponent (higher = smoother).
std::vector<double> diamond_square(int levels, double roughness, double amplitude,
                                   std::uint64_t seed);

struct TerrainSpec {
  std::int64_t width = 256;
  std::int64_t height = 256;
  double gsd = 1.0;
  double amplitude = 200.0;
  double roughness = 0.7;
  std::uint64_t seed = 1;
};

// In-memory terrain centered on the world origin (north-up, pixel = gsd).
DsmGrid make_terrain(const TerrainSpec& spec);

struct PerturbationBounds {
  double max_rotation_deg = 0.0;
  double max_shift_px = 0.0;   // horizontal, in pixels
  double max_dz = 0.0;         // meters
  // Magnitudes are drawn from [min_fraction * max, max].
  double min_fraction = 0.0;
};

// Random rigid motion about `center`: rotation about a random axis, horizontal
// shift in a random direction, vertical shift of random sign.
RigidTransform random_perturbation(SplitMix64& rng, const PerturbationBounds& bounds, double gsd,
                                   const Point3& center);

// Sub-lattice of `grid` starting at pixel (u0, v0).
Lattice crop_lattice(const DsmGrid& grid, std::int64_t u0, std::int64_t v0, std::int64_t width,
                     std::int64_t height);

struct MosaicSpec {
  std::uint64_t seed = 1;
  int rows = 3;
  int cols = 3;
  std::int64_t tile_size = 96;
  double overlap = 0.3;  // shared fraction of the tile side between rook neighbors
  double gsd = 1.0;
  double amplitude = 200.0;
  double roughness = 0.7;
  PerturbationBounds perturbation;
  bool perturb_anchor = false;  // tile 0 keeps the terrain frame when false
  double nodata_fraction = 0.0;
  double noise_sigma = 0.0;

  void validate() const;
};

struct MosaicScene {
  DsmGrid truth;
  std::vector<DsmGrid> tiles;
  // tile k = applied[k] applied to the terrain.
  std::vector<RigidTransform> applied;
  // Registration answer with tile 0 as anchor: applied[0] * applied[k]^-1.
  std::vector<RigidTransform> true_poses;
};

MosaicScene make_mosaic(const MosaicSpec& spec);

}  // namespace dsmreg
