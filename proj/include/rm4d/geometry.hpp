#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>

namespace rm4d {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Transform = Eigen::Isometry3d;

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

inline Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

inline Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

inline Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

/// Fixed-axis roll/pitch/yaw: R = Rz(yaw) * Ry(pitch) * Rx(roll).
inline Mat3 rpy_to_matrix(double roll, double pitch, double yaw) {
  return rot_z(yaw) * rot_y(pitch) * rot_x(roll);
}

inline Transform make_transform(const Vec3& xyz, const Vec3& rpy) {
  Transform t = Transform::Identity();
  t.linear() = rpy_to_matrix(rpy.x(), rpy.y(), rpy.z());
  t.translation() = xyz;
  return t;
}

/// Rotation about a world-z axis applied to a pose from the left.
inline Transform world_z_rotation(double angle) {
  Transform t = Transform::Identity();
  t.linear() = rot_z(angle);
  return t;
}

/// Geodesic angle between two rotations, in radians.
inline double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const double tr = (a.transpose() * b).trace();
  const double c = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

inline bool is_rotation_matrix(const Mat3& r, double tol = 1e-9) {
  const Mat3 should_be_identity = r.transpose() * r;
  if ((should_be_identity - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  return std::abs(r.determinant() - 1.0) <= tol;
}

}  // namespace rm4d
