#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "dsmreg/geotransform.h"

namespace dsmreg {

// SE(3) element x -> R x + t.
class RigidTransform {
 public:
  RigidTransform() = default;
  RigidTransform(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
      : rotation_(rotation), translation_(translation) {}

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const Eigen::Vector3d& axis, double angle_rad,
                                        const Eigen::Vector3d& translation = Eigen::Vector3d::Zero());
  static RigidTransform from_translation(const Eigen::Vector3d& translation) {
    return {Eigen::Matrix3d::Identity(), translation};
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  Point3 operator()(const Point3& p) const { return rotation_ * p + translation_; }

  // (a * b)(x) = a(b(x))
  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
  }

  RigidTransform inverse() const {
    const Eigen::Matrix3d rt = rotation_.transpose();
    return {rt, -(rt * translation_)};
  }

  // Geodesic rotation angle in radians, in [0, pi].
  double angle() const;

  // ||R^T R - I||_F <= tol and det(R) > 0.
  bool is_valid(double tol = 1e-9) const;

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_ = Eigen::Vector3d::Zero();
};

double rotation_angle(const Eigen::Matrix3d& r);

// ||a - b||_F, the chordal distance between two rotations.
double chordal_distance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

}  // namespace dsmreg
