#pragma once

#include <Eigen/Core>

namespace dsmreg {

using Point3 = Eigen::Vector3d;

struct PixelCoord {
  double u = 0.0;  // column
  double v = 0.0;  // row
};

// Affine pixel <-> world mapping. The origin is the world position of the
// CENTER of pixel (0, 0), the same anchoring a world file uses.
//
//   x = x_origin + x_scale * u + x_skew * v
//   y = y_origin + y_skew  * u + y_scale * v
struct GeoTransform {
  double x_origin = 0.0;
  double y_origin = 0.0;
  double x_scale = 1.0;
  double y_scale = -1.0;
  double x_skew = 0.0;
  double y_skew = 0.0;

  double determinant() const { return x_scale * y_scale - x_skew * y_skew; }
  bool invertible() const;

  // World distance between adjacent pixel centers along u and along v.
  double u_spacing() const;
  double v_spacing() const;

  // Pixels per world meter along each pixel axis: the row norms of the inverse
  // 2x2 matrix. A world disc of radius r covers at most r * u_extent_per_meter()
  // columns either side of its center. Throws SingularTransform.
  double u_extent_per_meter() const;
  double v_extent_per_meter() const;

  bool operator==(const GeoTransform&) const = default;
};

Point3 uv_to_world(double u, double v, const GeoTransform& gt, double h = 0.0);

// Exact inverse of uv_to_world in the horizontal plane; rounding is left to the
// caller. Throws SingularTransform.
PixelCoord world_to_uv(double x, double y, const GeoTransform& gt);

}  // namespace dsmreg
