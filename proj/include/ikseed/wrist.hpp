#pragma once

// Spherical-wrist geometry and the closed-form Z-X-Z solver.
//
// For an arm whose three wrist axes intersect, the lower-arm -> hand rotation
// factors as  R = K Rz(a) Rx(b) Rz(c) K^T M  where K maps the canonical
// Z-X-Z axes onto the wrist axes (expressed in the lower-arm frame at zero)
// and M is the fixed rotation left over once all joint origins are pushed
// through. WristGeometry extracts K, M and the wrist-center offsets from the
// chain so the solver only ever sees the canonical Z-X-Z problem.

#include "ikseed/chain.hpp"
#include "ikseed/errors.hpp"
#include "ikseed/pose.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

namespace ikseed {

using JointLimits = std::pair<double, double>;

struct WristSolution {
  enum class Branch { Primary, Mirror };
  std::array<double, 3> angles{};  // (alpha, beta, gamma)
  Branch branch = Branch::Primary;
};

inline Mat3 zxz_rotation(double a, double b, double c) { return rot_z(a) * rot_x(b) * rot_z(c); }

namespace detail {

/// Shifts an angle by multiples of 2*pi into [lo, hi], preferring the
/// representative nearest the principal value.
inline std::optional<double> fit_angle(double x, double lo, double hi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  x = std::remainder(x, two_pi);
  for (int k : {0, -1, 1, -2, 2}) {
    const double y = x + k * two_pi;
    if (y >= lo && y <= hi) return y;
  }
  return std::nullopt;
}

}  // namespace detail

/// Euler decomposition R = Rz(alpha) Rx(beta) Rz(gamma) filtered by joint limits.
///
/// Both branches (beta, -beta with alpha, gamma shifted by pi) are returned when
/// feasible. When |sin beta| < 1e-8 only alpha + gamma (or alpha - gamma near
/// beta = pi) is determined; gamma = 0 is tried first, then alpha = 0.
inline std::vector<WristSolution> solve_zxz(const Mat3& r, const std::array<JointLimits, 3>& limits) {
  using Branch = WristSolution::Branch;
  constexpr double pi = std::numbers::pi;
  const double cb = std::clamp(r(2, 2), -1.0, 1.0);
  const double sb = std::hypot(r(0, 2), r(1, 2));
  const double beta = std::atan2(sb, cb);

  std::vector<WristSolution> out;
  auto push = [&](double a, double b, double c, Branch branch) {
    if (b < limits[1].first || b > limits[1].second) return false;
    auto fa = detail::fit_angle(a, limits[0].first, limits[0].second);
    auto fc = detail::fit_angle(c, limits[2].first, limits[2].second);
    if (!fa || !fc) return false;
    out.push_back({{*fa, b, *fc}, branch});
    return true;
  };

  if (sb < 1e-8) {
    // gimbal lock: R ~ Rz(a + c) near beta = 0, R ~ Rz(a - c) Rx(pi) near beta = pi
    const bool near_zero = cb > 0.0;
    const double total = near_zero ? std::atan2(r(1, 0) - r(0, 1), r(0, 0) + r(1, 1))
                                   : std::atan2(r(1, 0) + r(0, 1), r(0, 0) - r(1, 1));
    auto split = [&](double b, Branch branch) {
      if (!push(total, b, 0.0, branch)) push(0.0, b, near_zero ? total : -total, branch);
    };
    split(beta, Branch::Primary);
    if (-beta != beta) split(-beta, Branch::Mirror);
    return out;
  }

  const double alpha = std::atan2(r(0, 2), -r(1, 2));
  // the better-conditioned of (alpha + gamma) and (alpha - gamma) fixes gamma
  double gamma;
  if (cb >= 0.0) {
    const double sum = std::atan2(r(1, 0) - r(0, 1), r(0, 0) + r(1, 1));
    gamma = sum - alpha;
  } else {
    const double diff = std::atan2(r(1, 0) + r(0, 1), r(0, 0) - r(1, 1));
    gamma = alpha - diff;
  }
  push(alpha, beta, gamma, Branch::Primary);
  push(alpha + pi, -beta, gamma + pi, Branch::Mirror);
  return out;
}

/// Fixed wrist geometry of one arm, extracted from the chain.
struct WristGeometry {
  Mat3 frame = Mat3::Identity();      // K
  Mat3 residual = Mat3::Identity();   // M
  Vec3 center_in_lower_arm = Vec3::Zero();
  Vec3 hand_offset = Vec3::Zero();    // wrist center -> hand, in the hand frame
  std::array<JointLimits, 3> limits{};

  /// Hand rotation relative to the lower-arm link for given wrist angles.
  Mat3 relative_rotation(const std::array<double, 3>& angles) const {
    return frame * zxz_rotation(angles[0], angles[1], angles[2]) * frame.transpose() * residual;
  }
  /// Canonical Z-X-Z target for a desired lower-arm -> hand rotation.
  Mat3 canonical(const Mat3& lower_to_hand) const {
    return frame.transpose() * lower_to_hand * residual.transpose() * frame;
  }
};

inline WristGeometry wrist_geometry(const KinematicChain& chain, const ArmFrames& arm) {
  const auto& path = chain.path_to(arm.hand);
  const auto& joints = chain.joints();
  // joints strictly below lower_arm, in order
  std::vector<std::size_t> tail;
  bool started = false;
  for (auto j : path) {
    if (!started && chain.joint_parent_link(j) == arm.lower_arm) started = true;
    if (started) tail.push_back(j);
  }

  // segments[0] = lower_arm -> wrist 1 frame, segments[k] = after wrist k -> wrist k+1 frame,
  // segments[3] = after wrist 3 -> hand
  std::array<Pose, 4> segments;
  std::array<Vec3, 3> axes;
  std::size_t seen = 0;
  for (auto j : tail) {
    const Joint& jt = joints[j];
    segments[seen] = compose(segments[seen], jt.origin);
    if (jt.moves()) {
      if (seen >= 3 || chain.movable_of_joint(j) != arm.wrist[seen])
        throw ValidationError("arm '" + arm.name + "': unexpected movable joint '" + jt.name + "' in the wrist");
      if (jt.kind != JointKind::Revolute)
        throw ValidationError("arm '" + arm.name + "': wrist joint '" + jt.name + "' must be revolute");
      axes[seen] = jt.axis;
      ++seen;
    }
  }
  if (seen != 3) throw ValidationError("arm '" + arm.name + "': expected three wrist joints below lower_arm");

  constexpr double tol = 1e-9;
  if (segments[1].translation.norm() > tol || segments[2].translation.norm() > tol)
    throw ValidationError("arm '" + arm.name + "': wrist axes do not intersect (not a spherical wrist)");

  const Mat3 a0 = segments[0].rotation;
  const Mat3 a01 = a0 * segments[1].rotation;
  const Mat3 a012 = a01 * segments[2].rotation;
  const Vec3 v1 = a0 * axes[0];
  const Vec3 v2 = a01 * axes[1];
  const Vec3 v3 = a012 * axes[2];
  if (std::abs(v1.dot(v2)) > tol || (v3 - v1).norm() > tol)
    throw ValidationError("arm '" + arm.name + "': wrist does not decompose as Z-X-Z");

  WristGeometry g;
  g.frame.col(0) = v2;
  g.frame.col(1) = v1.cross(v2);
  g.frame.col(2) = v1;
  g.residual = a012 * segments[3].rotation;
  g.center_in_lower_arm = segments[0].translation;
  g.hand_offset = segments[3].rotation.transpose() * segments[3].translation;
  for (std::size_t k = 0; k < 3; ++k) g.limits[k] = {chain.lower(arm.wrist[k]), chain.upper(arm.wrist[k])};
  return g;
}

/// Wrist-center position for a desired hand pose (any frame).
inline Vec3 wrist_center(const Pose& hand, const Vec3& hand_offset) {
  return hand.translation - hand.rotation * hand_offset;
}

inline Vec3 wrist_center(const Pose& hand, const KinematicChain& chain, const std::string& arm) {
  return wrist_center(hand, wrist_geometry(chain, chain.arm(arm)).hand_offset);
}

}  // namespace ikseed
