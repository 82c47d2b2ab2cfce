#pragma once

// Test-only helpers: raster builders and independent oracles. Nothing here
// calls into the code paths it is used to check.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "dsmreg/geotransform.h"
#include "dsmreg/raster.h"

namespace dsmreg::testing {

inline constexpr double kNodata = -9999.0;

inline GeoTransform unit_transform(double x0 = 0.0, double y0 = 0.0, double gsd = 1.0) {
  GeoTransform gt;
  gt.x_origin = x0;
  gt.y_origin = y0;
  gt.x_scale = gsd;
  gt.y_scale = -gsd;
  return gt;
}

inline DsmGrid grid_from(std::int64_t w, std::int64_t h, std::vector<double> values,
                         const GeoTransform& gt = unit_transform(), double nodata = kNodata) {
  return make_memory_grid(w, h, gt, nodata, std::move(values));
}

struct RandomRaster {
  std::int64_t width = 0;
  std::int64_t height = 0;
  GeoTransform gt;
  std::vector<double> heights;  // kNodata marks holes
};

// Random rough raster with a given nodata probability.
inline RandomRaster random_raster(std::mt19937_64& rng, std::int64_t max_side,
                                  double max_nodata = 0.5) {
  std::uniform_int_distribution<std::int64_t> side(1, max_side);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RandomRaster r;
  r.width = side(rng);
  r.height = side(rng);
  const double gsd = 0.25 + 2.0 * unit(rng);
  const double aniso = 0.5 + unit(rng);
  r.gt.x_origin = 100.0 * (unit(rng) - 0.5);
  r.gt.y_origin = 100.0 * (unit(rng) - 0.5);
  r.gt.x_scale = gsd;
  r.gt.y_scale = -gsd * aniso;
  const double p_nodata = max_nodata * unit(rng);
  const double relief = 20.0 * unit(rng);
  r.heights.resize(static_cast<std::size_t>(r.width * r.height));
  for (auto& h : r.heights) h = unit(rng) < p_nodata ? kNodata : relief * unit(rng);
  // Guarantee one valid pixel.
  r.heights[static_cast<std::size_t>(rng() % r.heights.size())] = relief * unit(rng);
  return r;
}

struct OracleNn {
  std::int64_t u = -1;
  std::int64_t v = -1;
  double distance = std::numeric_limits<double>::infinity();
};

// Independent double loop over the raw height array. Rows scanned top to
// bottom, columns left to right, strict improvement only -> smallest (v, u)
// wins ties.
inline OracleNn oracle_nearest(const Eigen::Vector3d& q, const RandomRaster& r) {
  OracleNn best;
  for (std::int64_t v = 0; v < r.height; ++v) {
    for (std::int64_t u = 0; u < r.width; ++u) {
      const double h = r.heights[static_cast<std::size_t>(v * r.width + u)];
      if (h == kNodata) continue;
      const double x = r.gt.x_origin + r.gt.x_scale * static_cast<double>(u) +
                       r.gt.x_skew * static_cast<double>(v);
      const double y = r.gt.y_origin + r.gt.y_skew * static_cast<double>(u) +
                       r.gt.y_scale * static_cast<double>(v);
      const double dx = q.x() - x, dy = q.y() - y, dz = q.z() - h;
      const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (d < best.distance) best = {u, v, d};
    }
  }
  return best;
}

// Direct evaluation of the gated RMSE over two same-lattice arrays, dividing
// by the inlier count.
struct DirectRmse {
  double rmse = 0.0;
  std::int64_t inliers = 0;
};
inline DirectRmse gated_rmse_direct(const std::vector<double>& a, const std::vector<double>& b, double tau) {
  double sum = 0.0;
  DirectRmse out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == kNodata || b[i] == kNodata) continue;
    const double d = a[i] - b[i];
    if (std::abs(d) < tau) {
      sum += d * d;
      ++out.inliers;
    }
  }
  out.rmse = out.inliers ? std::sqrt(sum / static_cast<double>(out.inliers)) : 0.0;
  return out;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng, double max_angle_rad = M_PI) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> a(0.0, max_angle_rad);
  const Eigen::Vector3d axis(n(rng), n(rng), n(rng));
  return Eigen::AngleAxisd(a(rng), axis.normalized()).toRotationMatrix();
}

// All spanning trees of a small graph, as lists of edge indices.
inline void enumerate_spanning_trees(int n, const std::vector<std::pair<int, int>>& edges,
                                     std::vector<std::vector<int>>& out) {
  const int m = static_cast<int>(edges.size());
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    if (__builtin_popcount(mask) != n - 1) continue;
    std::vector<int> parent(n);
    for (int k = 0; k < n; ++k) parent[k] = k;
    auto find = [&](int x) {
      while (parent[x] != x) x = parent[x];
      return x;
    };
    bool acyclic = true;
    std::vector<int> chosen;
    for (int e = 0; e < m && acyclic; ++e) {
      if (!(mask & (1u << e))) continue;
      const int a = find(edges[e].first), b = find(edges[e].second);
      if (a == b) acyclic = false;
      parent[a] = b;
      chosen.push_back(e);
    }
    if (acyclic) out.push_back(chosen);
  }
}

}  // namespace dsmreg::testing
