#pragma once

// Rigid transforms in 3-D plus the rotation helpers shared by the kinematics,
// wrist solver, IK solver and evaluation code.

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ikseed {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

inline Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
inline Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
inline Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

/// Rotation by angle about a unit axis (Rodrigues).
inline Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

/// Rotation logarithm as an axis-angle vector with angle in [0, pi].
inline Vec3 rotation_log(const Mat3& r) {
  const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  const double angle = std::acos(c);
  const Vec3 vee(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  if (angle < 1e-6) {
    // first-order series; sin(a)/a ~ 1 - a^2/6
    return 0.5 * (1.0 + angle * angle / 6.0) * vee;
  }
  if (std::numbers::pi - angle < 1e-4) {
    // near pi the antisymmetric part vanishes; recover the axis from the
    // symmetric part and fix its sign with whatever vee still carries.
    const Mat3 b = 0.5 * (r + Mat3::Identity());
    Eigen::Index k = 0;
    b.diagonal().maxCoeff(&k);
    Vec3 axis = b.col(k) / std::sqrt(std::max(b(k, k), 1e-300));
    axis.normalize();
    if (axis.dot(vee) < 0.0) axis = -axis;
    return angle * axis;
  }
  return angle / (2.0 * std::sin(angle)) * vee;
}

inline Mat3 rotation_exp(const Vec3& w) {
  const double angle = w.norm();
  if (angle < 1e-15) return Mat3::Identity() + skew(w);
  return axis_angle(w / angle, angle);
}

/// Fixed-axis roll-pitch-yaw: Rz(yaw) * Ry(pitch) * Rx(roll).
inline Mat3 rpy(double roll, double pitch, double yaw) {
  return rot_z(yaw) * rot_y(pitch) * rot_x(roll);
}

/// Nearest rotation matrix in the Frobenius sense.
inline Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

/// Unit quaternion with non-negative scalar part.
inline Quat canonical_quat(const Mat3& r) {
  Quat q(r);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Pose() = default;
  Pose(const Mat3& r, const Vec3& t) : rotation(r), translation(t) {}

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  static Pose from_rotation(const Mat3& r) { return {r, Vec3::Zero()}; }
  static Pose from_quat(const Quat& q, const Vec3& t) {
    return {q.normalized().toRotationMatrix(), t};
  }

  Quat quaternion() const { return canonical_quat(rotation); }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  /// Max of |R^T R - I| and |det R - 1|.
  double orthonormality_error() const {
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    return std::max(ortho, std::abs(rotation.determinant() - 1.0));
  }
  bool is_valid(double tol = 1e-9) const {
    return rotation.allFinite() && translation.allFinite() && orthonormality_error() <= tol;
  }
};

inline Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline Pose inverse(const Pose& a) {
  const Mat3 rt = a.rotation.transpose();
  return {rt, -(rt * a.translation)};
}

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

/// Translation distance and rotation angle between two poses.
struct PoseError {
  double position = 0.0;
  double orientation = 0.0;
};

inline PoseError pose_error(const Pose& a, const Pose& b) {
  return {(a.translation - b.translation).norm(),
          rotation_log(a.rotation * b.rotation.transpose()).norm()};
}

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace ikseed
