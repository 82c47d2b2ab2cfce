#include "dsmreg/rigid_transform.h"

#include <algorithm>
#include <cmath>

namespace dsmreg {

RigidTransform RigidTransform::from_axis_angle(const Eigen::Vector3d& axis, double angle_rad,
                                               const Eigen::Vector3d& translation) {
  return {Eigen::AngleAxisd(angle_rad, axis.normalized()).toRotationMatrix(), translation};
}

double rotation_angle(const Eigen::Matrix3d& r) {
  // atan2 form stays accurate near 0 and pi, unlike acos((tr - 1) / 2).
  const Eigen::Vector3d axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (r.trace() - 1.0));
}

double RigidTransform::angle() const { return rotation_angle(rotation_); }

bool RigidTransform::is_valid(double tol) const {
  const double orth = (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity()).norm();
  return orth <= tol && rotation_.determinant() > 0.0 && translation_.allFinite();
}

double chordal_distance(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  return (a - b).norm();
}

}  // namespace dsmreg
