#include "dsmreg/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <fmt/format.h>

#include "dsmreg/errors.h"

namespace dsmreg {

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double SplitMix64::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double SplitMix64::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> diamond_square(int levels, double roughness, double amplitude,
                                   std::uint64_t seed) {
  if (levels < 1 || levels > 14) {
    throw DsmError(ErrorCode::kInvalidArgument, "diamond-square levels must be in [1, 14]");
  }
  const std::int64_t n = (std::int64_t{1} << levels) + 1;
  std::vector<double> h(static_cast<std::size_t>(n * n), 0.0);
  auto at = [&](std::int64_t x, std::int64_t y) -> double& {
    return h[static_cast<std::size_t>(y * n + x)];
  };
  SplitMix64 rng(seed);
  double scale = amplitude;
  for (auto [x, y] : {std::pair<std::int64_t, std::int64_t>{0, 0}, {n - 1, 0}, {0, n - 1},
                      {n - 1, n - 1}})
    at(x, y) = rng.uniform(-scale, scale);

  const double decay = std::pow(2.0, -roughness);
  for (std::int64_t step = n - 1; step > 1; step /= 2) {
    const std::int64_t half = step / 2;
    scale *= decay;
    // Diamond: square centers.
    for (std::int64_t y = half; y < n; y += step)
      for (std::int64_t x = half; x < n; x += step)
        at(x, y) = 0.25 * (at(x - half, y - half) + at(x + half, y - half) +
                           at(x - half, y + half) + at(x + half, y + half)) +
                   rng.uniform(-scale, scale);
    // Square: edge midpoints, averaging the neighbors inside the lattice.
    for (std::int64_t y = 0; y < n; y += half) {
      for (std::int64_t x = (y / half) % 2 == 0 ? half : 0; x < n; x += step) {
        double sum = 0.0;
        int count = 0;
        if (x >= half) sum += at(x - half, y), ++count;
        if (x + half < n) sum += at(x + half, y), ++count;
        if (y >= half) sum += at(x, y - half), ++count;
        if (y + half < n) sum += at(x, y + half), ++count;
        at(x, y) = sum / count + rng.uniform(-scale, scale);
      }
    }
  }
  return h;
}

DsmGrid make_terrain(const TerrainSpec& spec) {
  if (spec.width < 2 || spec.height < 2 || !(spec.gsd > 0.0)) {
    throw DsmError(ErrorCode::kInvalidArgument, "terrain needs >= 2x2 pixels and gsd > 0");
  }
  int levels = 1;
  while ((std::int64_t{1} << levels) + 1 < std::max(spec.width, spec.height)) ++levels;
  const std::int64_t n = (std::int64_t{1} << levels) + 1;
  const std::vector<double> full = diamond_square(levels, spec.roughness, spec.amplitude, spec.seed);
  const std::int64_t u0 = (n - spec.width) / 2;
  const std::int64_t v0 = (n - spec.height) / 2;
  std::vector<double> crop;
  crop.reserve(static_cast<std::size_t>(spec.width * spec.height));
  for (std::int64_t v = 0; v < spec.height; ++v)
    for (std::int64_t u = 0; u < spec.width; ++u)
      crop.push_back(full[static_cast<std::size_t>((v0 + v) * n + u0 + u)]);
  GeoTransform gt;
  gt.x_scale = spec.gsd;
  gt.y_scale = -spec.gsd;
  gt.x_origin = -0.5 * static_cast<double>(spec.width - 1) * spec.gsd;
  gt.y_origin = 0.5 * static_cast<double>(spec.height - 1) * spec.gsd;
  return make_memory_grid(spec.width, spec.height, gt, kDefaultNodata, std::move(crop));
}

RigidTransform random_perturbation(SplitMix64& rng, const PerturbationBounds& bounds, double gsd,
                                   const Point3& center) {
  auto magnitude = [&](double max) { return rng.uniform(bounds.min_fraction * max, max); };
  // Uniform random axis.
  const double z = rng.uniform(-1.0, 1.0);
  const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  const Eigen::Vector3d axis(r * std::cos(phi), r * std::sin(phi), z);
  const double angle = magnitude(bounds.max_rotation_deg) * std::numbers::pi / 180.0;
  const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double shift = magnitude(bounds.max_shift_px) * gsd;
  const double dz = magnitude(bounds.max_dz) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  const Eigen::Vector3d t(shift * std::cos(heading), shift * std::sin(heading), dz);
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  // Rotate about `center`, then translate.
  return {rot, center - rot * center + t};
}

Lattice crop_lattice(const DsmGrid& grid, std::int64_t u0, std::int64_t v0, std::int64_t width,
                     std::int64_t height) {
  Lattice l{grid.geotransform(), width, height};
  const Point3 origin = uv_to_world(static_cast<double>(u0), static_cast<double>(v0),
                                    grid.geotransform());
  l.gt.x_origin = origin.x();
  l.gt.y_origin = origin.y();
  return l;
}

void MosaicSpec::validate() const {
  auto fail = [](const std::string& what) {
    throw DsmError(ErrorCode::kInvalidArgument, "synthetic mosaic: " + what);
  };
  if (rows < 1 || cols < 1) fail("rows and cols must be >= 1");
  if (tile_size < 8) fail("tile_size must be >= 8");
  if (!(overlap >= 0.0 && overlap < 1.0)) fail("overlap must be in [0, 1)");
  if (!(gsd > 0.0)) fail("gsd must be > 0");
  if (!(nodata_fraction >= 0.0 && nodata_fraction < 0.9)) fail("nodata_fraction must be in [0, 0.9)");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (perturbation.max_rotation_deg < 0 || perturbation.max_shift_px < 0 || perturbation.max_dz < 0)
    fail("perturbation bounds must be >= 0");
  if (perturbation.max_rotation_deg > 30.0) fail("max rotation must be <= 30 degrees");
}

namespace {

// Discs of nodata until the requested fraction of the tile is covered.
void punch_holes(std::vector<double>& h, std::int64_t size, double fraction, SplitMix64& rng) {
  const auto target = static_cast<std::int64_t>(fraction * static_cast<double>(size * size));
  std::int64_t holes = 0;
  const double radius = std::max(1.5, 0.03 * static_cast<double>(size));
  while (holes < target) {
    const double cu = rng.uniform(0.0, static_cast<double>(size));
    const double cv = rng.uniform(0.0, static_cast<double>(size));
    const auto r = static_cast<std::int64_t>(std::ceil(radius));
    for (std::int64_t v = std::max<std::int64_t>(0, static_cast<std::int64_t>(cv) - r);
         v <= std::min(size - 1, static_cast<std::int64_t>(cv) + r) && holes < target; ++v) {
      for (std::int64_t u = std::max<std::int64_t>(0, static_cast<std::int64_t>(cu) - r);
           u <= std::min(size - 1, static_cast<std::int64_t>(cu) + r) && holes < target; ++u) {
        double& cell = h[static_cast<std::size_t>(v * size + u)];
        if (cell == kDefaultNodata) continue;
        if (std::hypot(static_cast<double>(u) - cu, static_cast<double>(v) - cv) > radius) continue;
        cell = kDefaultNodata;
        ++holes;
      }
    }
  }
}

}  // namespace

MosaicScene make_mosaic(const MosaicSpec& spec) {
  spec.validate();
  const auto step = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::llround(static_cast<double>(spec.tile_size) *
                                                (1.0 - spec.overlap))));
  // Margin so posed tiles still sample terrain at their borders.
  const double tilt = std::sin(spec.perturbation.max_rotation_deg * std::numbers::pi / 180.0);
  const auto margin = static_cast<std::int64_t>(std::ceil(
      spec.perturbation.max_shift_px + tilt * (static_cast<double>(spec.tile_size) + spec.amplitude / spec.gsd) + 4));
  const std::int64_t width = (spec.cols - 1) * step + spec.tile_size + 2 * margin;
  const std::int64_t height = (spec.rows - 1) * step + spec.tile_size + 2 * margin;

  MosaicScene scene{make_terrain({width, height, spec.gsd, spec.amplitude, spec.roughness,
                                  spec.seed}),
                    {}, {}, {}};
  SplitMix64 rng(spec.seed ^ 0x5eed5eed5eedULL);
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const int k = r * spec.cols + c;
      const Lattice lattice =
          crop_lattice(scene.truth, margin + c * step, margin + r * step, spec.tile_size,
                       spec.tile_size);
      const Point3 center = uv_to_world(0.5 * static_cast<double>(spec.tile_size - 1),
                                        0.5 * static_cast<double>(spec.tile_size - 1), lattice.gt);
      RigidTransform applied;
      if (k > 0 || spec.perturb_anchor) {
        applied = random_perturbation(rng, spec.perturbation, spec.gsd, center);
      }
      DsmGrid posed = apply_pose(scene.truth, applied, lattice);
      if (spec.noise_sigma > 0.0 || spec.nodata_fraction > 0.0) {
        std::vector<double> h = read_all(posed);
        if (spec.noise_sigma > 0.0) {
          for (double& x : h)
            if (x != kDefaultNodata) x += spec.noise_sigma * rng.normal();
        }
        if (spec.nodata_fraction > 0.0) punch_holes(h, spec.tile_size, spec.nodata_fraction, rng);
        posed = make_memory_grid(spec.tile_size, spec.tile_size, lattice.gt, kDefaultNodata,
                                 std::move(h));
      }
      scene.tiles.push_back(posed.with_id(k));
      scene.applied.push_back(applied);
    }
  }
  for (const auto& a : scene.applied) scene.true_poses.push_back(scene.applied[0] * a.inverse());
  return scene;
}

}  // namespace dsmreg
