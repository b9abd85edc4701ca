#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>

#include "plenograsp/rng.hpp"

namespace plenograsp {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec2i = Eigen::Vector2i;
using Vec3i = Eigen::Vector3i;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using Pose = Eigen::Isometry3d;  // rigid transform, local frame -> world

// Max |R*R^T - I| entry; 0 for an exact rotation.
inline double orthonormality_error(const Mat3& r) {
  return (r * r.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
}

inline bool is_rotation(const Mat3& r, double tol = 1e-6) {
  return orthonormality_error(r) <= tol && r.determinant() > 0.0;
}

// Uniform rotation (Shoemake's method); consumes exactly three uniforms.
inline Quat random_rotation(Rng& rng) {
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  const double u3 = rng.uniform();
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  return Quat(a * std::sin(2.0 * M_PI * u2), a * std::cos(2.0 * M_PI * u2),
              b * std::sin(2.0 * M_PI * u3), b * std::cos(2.0 * M_PI * u3));
}

// Intrinsic roll/pitch/yaw perturbation, composed as R * Rz(yaw)*Ry(pitch)*Rx(roll).
inline Mat3 rpy_rotation(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
          Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
          Eigen::AngleAxisd(roll, Vec3::UnitX()))
      .toRotationMatrix();
}

inline Pose make_pose(const Mat3& r, const Vec3& t) {
  Pose p = Pose::Identity();
  p.linear() = r;
  p.translation() = t;
  return p;
}

// Camera pose looking from `eye` toward `target`. Camera convention:
// +z forward (view direction), +x right, +y down (image row direction).
inline Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint = Vec3::UnitZ()) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up_hint);
  if (right.norm() < 1e-9) right = forward.cross(Vec3::UnitY());
  right.normalize();
  const Vec3 down = forward.cross(right).normalized();
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return make_pose(r, eye);
}

inline std::array<double, 16> pose_to_row_major(const Pose& p) {
  std::array<double, 16> out{};
  Eigen::Matrix4d m = p.matrix();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out[size_t(r * 4 + c)] = m(r, c);
  return out;
}

inline Pose pose_from_row_major(const std::array<double, 16>& v) {
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = v[size_t(r * 4 + c)];
  Pose p = Pose::Identity();
  p.matrix() = m;
  return p;
}

inline double rotation_angle(const Mat3& a, const Mat3& b) {
  const double c = ((a.transpose() * b).trace() - 1.0) * 0.5;
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace plenograsp
