#include "dsmreg/geotransform.h"

#include <cmath>

#include "dsmreg/errors.h"

namespace dsmreg {

namespace {

// Relative threshold below which the 2x2 matrix counts as singular.
constexpr double kSingularEps = 1e-15;

void check_invertible(const GeoTransform& gt) {
  if (!gt.invertible()) {
    throw DsmError(ErrorCode::kSingularTransform, "geotransform matrix is not invertible");
  }
}

}  // namespace

bool GeoTransform::invertible() const {
  const double scale = std::abs(x_scale * y_scale) + std::abs(x_skew * y_skew);
  const double det = determinant();
  return std::isfinite(det) && scale > 0.0 && std::abs(det) > kSingularEps * scale;
}

double GeoTransform::u_spacing() const { return std::hypot(x_scale, y_skew); }
double GeoTransform::v_spacing() const { return std::hypot(x_skew, y_scale); }

double GeoTransform::u_extent_per_meter() const {
  check_invertible(*this);
  return std::hypot(y_scale, x_skew) / std::abs(determinant());
}

double GeoTransform::v_extent_per_meter() const {
  check_invertible(*this);
  return std::hypot(y_skew, x_scale) / std::abs(determinant());
}

Point3 uv_to_world(double u, double v, const GeoTransform& gt, double h) {
  return {gt.x_origin + gt.x_scale * u + gt.x_skew * v,
          gt.y_origin + gt.y_skew * u + gt.y_scale * v, h};
}

PixelCoord world_to_uv(double x, double y, const GeoTransform& gt) {
  check_invertible(gt);
  const double dx = x - gt.x_origin;
  const double dy = y - gt.y_origin;
  const double det = gt.determinant();
  return {(gt.y_scale * dx - gt.x_skew * dy) / det,
          (gt.x_scale * dy - gt.y_skew * dx) / det};
}

}  // namespace dsmreg
