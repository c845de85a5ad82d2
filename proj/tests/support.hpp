#pragma once

// Chains and oracles shared by the unit tests and the acceptance binary.

#include "ikseed/arm_guess.hpp"
#include "ikseed/chain.hpp"
#include "ikseed/reachability_map.hpp"
#include "ikseed/pose.hpp"
#include "ikseed/wrist.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace ikseed::testing {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  return v.normalized();
}

inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

inline Pose random_pose(std::mt19937_64& rng, double extent = 0.4) {
  return {random_rotation(rng), Vec3(uniform(rng, -extent, extent), uniform(rng, -extent, extent),
                                     uniform(rng, -extent, extent))};
}

/// Serial chain of `dof` movable joints with random axes and offsets,
/// a fixed tip at the end. limit is the symmetric joint range.
inline KinematicChain random_serial_chain(std::mt19937_64& rng, std::size_t dof, double prismatic_share = 0.3,
                                          double limit = 3.0) {
  KinematicChain::Definition def;
  def.name = "random";
  def.root_link = "base";
  std::string parent = "base";
  for (std::size_t i = 0; i < dof; ++i) {
    Joint j;
    j.name = "j" + std::to_string(i);
    j.kind = uniform(rng, 0.0, 1.0) < prismatic_share ? JointKind::Prismatic : JointKind::Revolute;
    j.axis = random_unit(rng);
    j.origin = random_pose(rng, 0.3);
    j.lower = -limit;
    j.upper = limit;
    j.parent = parent;
    j.child = "l" + std::to_string(i);
    parent = j.child;
    def.joints.push_back(j);
  }
  Joint tip;
  tip.name = "tip_joint";
  tip.origin = random_pose(rng, 0.2);
  tip.parent = parent;
  tip.child = "tip";
  def.joints.push_back(tip);
  return KinematicChain(def);
}

inline JointState random_state(std::mt19937_64& rng, const KinematicChain& chain, double margin = 0.0) {
  JointState q(static_cast<Eigen::Index>(chain.dof()));
  for (std::size_t i = 0; i < chain.dof(); ++i)
    q[static_cast<Eigen::Index>(i)] = uniform(rng, chain.lower(i) + margin, chain.upper(i) - margin);
  return q;
}

/// A random 6-8 DOF chain and state whose Jacobian has full row rank with
/// condition number below 1e4, so relative comparisons of f are meaningful.
struct GoodnessInstance {
  KinematicChain chain;
  JointState q;
  Eigen::MatrixXd jac;
};

inline GoodnessInstance well_conditioned_instance(std::mt19937_64& rng, std::size_t dof) {
  for (;;) {
    auto chain = random_serial_chain(rng, dof);
    JointState q = random_state(rng, chain, 0.3);
    std::vector<std::size_t> active(chain.dof());
    for (std::size_t i = 0; i < active.size(); ++i) active[i] = i;
    Eigen::MatrixXd jac = geometric_jacobian(chain, q, chain.link("tip"), active);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
    const auto& sv = svd.singularValues();
    if (sv(5) > 1e-4 * sv(0)) return {std::move(chain), std::move(q), std::move(jac)};
  }
}

inline double yoshikawa(const Eigen::MatrixXd& j) {
  return std::sqrt(std::max(0.0, (j * j.transpose()).determinant()));
}

inline Joint make_joint(const std::string& name, JointKind kind, const Vec3& axis, const Vec3& offset, double lo,
                        double hi, const std::string& parent, const std::string& child) {
  Joint j;
  j.name = name;
  j.kind = kind;
  j.axis = axis;
  j.origin = Pose::from_translation(offset);
  j.lower = lo;
  j.upper = hi;
  j.parent = parent;
  j.child = child;
  return j;
}

/// Three positional joints (yaw, pitch, pitch) followed by a Z-X-Z spherical
/// wrist. Wrist limits are narrower than 2*pi so that filtering matters.
inline KinematicChain toy_arm() {
  using K = JointKind;
  KinematicChain::Definition def;
  def.name = "toy";
  def.root_link = "base";
  def.joints = {
      make_joint("mount", K::Fixed, Vec3::UnitZ(), {0.0, 0.0, 0.2}, 0, 0, "base", "arm_base"),
      make_joint("yaw", K::Revolute, Vec3::UnitZ(), {0.0, 0.0, 0.0}, -2.5, 2.5, "arm_base", "l1"),
      make_joint("pitch1", K::Revolute, Vec3::UnitY(), {0.0, 0.0, 0.1}, -1.8, 1.8, "l1", "l2"),
      make_joint("pitch2", K::Revolute, Vec3::UnitY(), {0.0, 0.0, 0.3}, -2.4, 2.4, "l2", "lower_arm"),
      make_joint("w1", K::Revolute, Vec3::UnitZ(), {0.0, 0.0, 0.25}, -2.6, 2.6, "lower_arm", "w1_link"),
      make_joint("w2", K::Revolute, Vec3::UnitX(), {0.0, 0.0, 0.0}, -1.5, 1.5, "w1_link", "w2_link"),
      make_joint("w3", K::Revolute, Vec3::UnitZ(), {0.0, 0.0, 0.0}, -2.6, 2.6, "w2_link", "flange"),
      make_joint("tip", K::Fixed, Vec3::UnitZ(), {0.0, 0.0, 0.08}, 0, 0, "flange", "hand"),
  };
  def.arms = {{"arm", "arm_base", "lower_arm", {"w1", "w2", "w3"}, "hand"}};
  return KinematicChain(def);
}

/// Planar two-link arm in the xy plane, link lengths l1 and l2.
inline KinematicChain planar_2r(double l1 = 1.0, double l2 = 0.8) {
  using K = JointKind;
  KinematicChain::Definition def;
  def.name = "planar2r";
  def.root_link = "base";
  def.joints = {
      make_joint("q1", K::Revolute, Vec3::UnitZ(), Vec3::Zero(), -std::numbers::pi, std::numbers::pi, "base", "a"),
      make_joint("q2", K::Revolute, Vec3::UnitZ(), {l1, 0.0, 0.0}, -std::numbers::pi, std::numbers::pi, "a", "b"),
      make_joint("tip", K::Fixed, Vec3::UnitZ(), {l2, 0.0, 0.0}, 0, 0, "b", "tip"),
  };
  return KinematicChain(def);
}

/// Elbow-up and elbow-down closed-form solutions of the planar 2R arm.
inline std::array<std::array<double, 2>, 2> planar_2r_ik(double x, double y, double l1 = 1.0, double l2 = 0.8) {
  const double c2 = std::clamp((x * x + y * y - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0);
  std::array<std::array<double, 2>, 2> out{};
  for (int s = 0; s < 2; ++s) {
    const double q2 = (s == 0 ? 1.0 : -1.0) * std::acos(c2);
    const double q1 = std::atan2(y, x) - std::atan2(l2 * std::sin(q2), l1 + l2 * std::cos(q2));
    out[static_cast<std::size_t>(s)] = {std::remainder(q1, 2.0 * std::numbers::pi), q2};
  }
  return out;
}

/// Central-difference Jacobian of a link pose: (v, omega) rows.
inline Matrix6X numeric_jacobian(const KinematicChain& chain, const JointState& q, std::size_t link, double h = 1e-6) {
  Matrix6X jac(6, static_cast<Eigen::Index>(chain.dof()));
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    JointState qp = q, qm = q;
    qp[i] += h;
    qm[i] -= h;
    const Pose a = forward_kinematics(chain, qp, link);
    const Pose b = forward_kinematics(chain, qm, link);
    jac.block<3, 1>(0, i) = (a.translation - b.translation) / (2.0 * h);
    jac.block<3, 1>(3, i) = rotation_log(a.rotation * b.rotation.transpose()) / (2.0 * h);
  }
  return jac;
}

/// Linear scan over every stored sample.
inline std::vector<MapHit> brute_query(const ReachabilityMap& map, const Vec3& target, double r) {
  std::vector<MapHit> hits;
  for (std::size_t s = 0; s < map.size(); ++s) {
    const double d = (map.center(s) - target).norm();
    if (d <= r) hits.push_back({static_cast<std::uint32_t>(s), d});
  }
  std::sort(hits.begin(), hits.end(), [](const MapHit& a, const MapHit& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.sample < b.sample;
  });
  return hits;
}

/// Enumerates the positional lattice directly through forward kinematics and
/// solves the wrist for every lattice point whose center lies within r.
inline std::vector<Eigen::VectorXd> brute_candidates(const KinematicChain& chain, const std::string& arm_name,
                                                     double interval, const Pose& hand_in_arm_base, double r) {
  const ArmFrames& arm = chain.arm(arm_name);
  const WristGeometry g = wrist_geometry(chain, arm);
  const Vec3 target = wrist_center(hand_in_arm_base, g.hand_offset);
  const std::size_t n = arm.positional.size();
  std::vector<std::size_t> counts(n);
  std::size_t total = 1;
  for (std::size_t k = 0; k < n; ++k) {
    counts[k] = lattice_count(chain.lower(arm.positional[k]), chain.upper(arm.positional[k]), interval);
    total *= counts[k];
  }
  JointState q = chain.neutral_state();
  for (std::size_t k = 0; k < 3; ++k)
    q[static_cast<Eigen::Index>(arm.wrist[k])] = 0.5 * (g.limits[k].first + g.limits[k].second);
  std::vector<Eigen::VectorXd> out;
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t s = 0; s < total; ++s) {
    for (std::size_t k = 0; k < n; ++k)
      q[static_cast<Eigen::Index>(arm.positional[k])] =
          std::min(chain.lower(arm.positional[k]) + static_cast<double>(idx[k]) * interval, chain.upper(arm.positional[k]));
    const Pose lower = relative_pose(chain, q, arm.arm_base, arm.lower_arm);
    if ((lower.apply(g.center_in_lower_arm) - target).norm() <= r) {
      const Mat3 rel = lower.rotation.transpose() * hand_in_arm_base.rotation;
      for (const auto& sol : solve_zxz(g.canonical(rel), g.limits)) {
        Eigen::VectorXd c(static_cast<Eigen::Index>(n + 3));
        for (std::size_t k = 0; k < n; ++k) c[static_cast<Eigen::Index>(k)] = q[static_cast<Eigen::Index>(arm.positional[k])];
        for (std::size_t k = 0; k < 3; ++k) c[static_cast<Eigen::Index>(n + k)] = sol.angles[k];
        out.push_back(c);
      }
    }
    for (std::size_t k = n; k-- > 0;) {
      if (++idx[k] < counts[k]) break;
      idx[k] = 0;
    }
  }
  return out;
}

/// Sorts joint vectors lexicographically so sets can be compared.
inline void sort_states(std::vector<Eigen::VectorXd>& v) {
  std::sort(v.begin(), v.end(), [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  });
}

/// Order-insensitive equality of two candidate sets within tol per entry.
inline bool same_state_sets(std::vector<Eigen::VectorXd> a, std::vector<Eigen::VectorXd> b, double tol = 1e-12) {
  if (a.size() != b.size()) return false;
  sort_states(a);
  sort_states(b);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].size() != b[i].size() || (a[i] - b[i]).cwiseAbs().maxCoeff() > tol) return false;
  return true;
}

}  // namespace ikseed::testing
