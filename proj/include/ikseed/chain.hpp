#pragma once

// Kinematic tree representation, forward kinematics and geometric Jacobians.
//
// Joints are stored in topological order: every joint's parent link is either
// the root link or the child link of an earlier joint. Only independent
// revolute/prismatic joints carry a value in a JointState. Fixed joints and
// coupled joints (whose value is a linear function of independent joints) are
// resolved during forward kinematics.

#include "ikseed/errors.hpp"
#include "ikseed/pose.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ikseed {

using JointState = Eigen::VectorXd;
using JointIndexSet = std::vector<std::size_t>;
using Matrix6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;

enum class JointKind { Revolute, Prismatic, Fixed };

inline const char* to_string(JointKind k) {
  switch (k) {
    case JointKind::Revolute: return "revolute";
    case JointKind::Prismatic: return "prismatic";
    case JointKind::Fixed: return "fixed";
  }
  return "?";
}

/// q_joint = offset + sum(gain * q_source) over independent source joints.
struct JointCoupling {
  std::vector<std::pair<std::string, double>> terms;
  double offset = 0.0;
};

struct Joint {
  std::string name;
  JointKind kind = JointKind::Fixed;
  Vec3 axis = Vec3::UnitZ();
  Pose origin;  // parent link frame -> joint frame at q = 0
  double lower = 0.0;
  double upper = 0.0;
  std::string parent;
  std::string child;
  std::optional<JointCoupling> coupling;

  bool moves() const { return kind != JointKind::Fixed; }
  bool independent() const { return moves() && !coupling; }

  /// Transform contributed by the joint's own motion.
  Pose motion(double q) const {
    switch (kind) {
      case JointKind::Revolute: return Pose::from_rotation(axis_angle(axis, q));
      case JointKind::Prismatic: return Pose::from_translation(axis * q);
      case JointKind::Fixed: break;
    }
    return Pose::identity();
  }
  Pose local_transform(double q) const { return compose(origin, motion(q)); }
};

/// Designated frames of one arm as written in the model file.
struct ArmSpec {
  std::string name;
  std::string arm_base;
  std::string lower_arm;
  std::vector<std::string> wrist_joints;
  std::string hand;
};

/// Arm frames resolved against a loaded chain. Indices into JointState are
/// "movable indices"; link indices refer to KinematicChain::links().
struct ArmFrames {
  std::string name;
  std::size_t arm_base = 0;
  std::size_t lower_arm = 0;
  std::size_t hand = 0;
  JointIndexSet positional;  // non-wrist arm joints, base to tip
  JointIndexSet wrist;       // wrist joints, base to tip
  JointIndexSet all() const {
    JointIndexSet a = positional;
    a.insert(a.end(), wrist.begin(), wrist.end());
    return a;
  }
};

class KinematicChain {
 public:
  struct Definition {
    std::string name;
    std::string root_link = "base";
    std::vector<Joint> joints;
    std::vector<ArmSpec> arms;
  };

  KinematicChain() = default;
  explicit KinematicChain(Definition def) { build(std::move(def)); }

  const std::string& name() const { return name_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<std::string>& links() const { return links_; }
  std::size_t dof() const { return movable_.size(); }

  /// Joint-array index of the i-th independent joint.
  std::size_t movable_joint(std::size_t i) const { return movable_.at(i); }
  const Joint& movable(std::size_t i) const { return joints_[movable_.at(i)]; }
  std::vector<std::string> movable_names() const {
    std::vector<std::string> out;
    out.reserve(movable_.size());
    for (auto j : movable_) out.push_back(joints_[j].name);
    return out;
  }

  std::optional<std::size_t> find_link(const std::string& name) const {
    auto it = link_index_.find(name);
    if (it == link_index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t link(const std::string& name) const {
    auto idx = find_link(name);
    if (!idx) throw ValidationError("unknown frame '" + name + "'");
    return *idx;
  }
  std::optional<std::size_t> find_movable(const std::string& joint_name) const {
    auto it = movable_index_.find(joint_name);
    if (it == movable_index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t movable_index(const std::string& joint_name) const {
    auto idx = find_movable(joint_name);
    if (!idx) throw ValidationError("'" + joint_name + "' is not an independent movable joint");
    return *idx;
  }
  JointIndexSet movable_indices(std::span<const std::string> names) const {
    JointIndexSet out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(movable_index(n));
    return out;
  }

  const std::vector<ArmFrames>& arms() const { return arms_; }
  const std::vector<ArmSpec>& arm_specs() const { return arm_specs_; }
  const ArmFrames& arm(const std::string& name) const {
    for (const auto& a : arms_)
      if (a.name == name) return a;
    throw ValidationError("unknown arm '" + name + "'");
  }

  /// Joint-array indices on the path root -> link, in order.
  const std::vector<std::size_t>& path_to(std::size_t link) const { return paths_.at(link); }
  bool is_ancestor(std::size_t ancestor, std::size_t link) const;

  double lower(std::size_t i) const { return movable(i).lower; }
  double upper(std::size_t i) const { return movable(i).upper; }
  bool within_limits(const JointState& q, double tol = 0.0) const {
    for (std::size_t i = 0; i < dof(); ++i)
      if (q[static_cast<Eigen::Index>(i)] < lower(i) - tol ||
          q[static_cast<Eigen::Index>(i)] > upper(i) + tol)
        return false;
    return true;
  }
  JointState clamp(JointState q) const {
    for (std::size_t i = 0; i < dof(); ++i) {
      auto k = static_cast<Eigen::Index>(i);
      q[k] = std::clamp(q[k], lower(i), upper(i));
    }
    return q;
  }
  /// Zero clamped into each joint's limits.
  JointState neutral_state() const { return clamp(JointState::Zero(static_cast<Eigen::Index>(dof()))); }

  /// Value of any joint (independent, coupled or fixed) under state q.
  double joint_value(std::size_t joint, const JointState& q) const;

  std::size_t joint_parent_link(std::size_t joint) const { return joint_parent_link_.at(joint); }
  std::size_t joint_child_link(std::size_t joint) const { return joint_child_link_.at(joint); }
  /// Movable index of a joint, or npos for fixed and coupled joints.
  std::size_t movable_of_joint(std::size_t joint) const { return movable_of_joint_.at(joint); }
  const std::vector<std::pair<std::size_t, double>>& coupling_terms(std::size_t joint) const {
    return coupling_terms_.at(joint);
  }
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  /// 64-bit FNV-1a hash of the canonical chain geometry.
  std::uint64_t hash() const { return hash_; }
  /// Hash of one arm's geometry only (joints between arm base and hand, frame names).
  /// Unaffected by the base or trunk, so a map stays valid when those change.
  std::uint64_t arm_hash(const std::string& arm) const;

  const Definition& definition() const { return def_; }

 private:
  void build(Definition def);

  Definition def_;
  std::string name_;
  std::vector<Joint> joints_;
  std::vector<std::string> links_;
  std::unordered_map<std::string, std::size_t> link_index_;
  std::vector<std::size_t> joint_parent_link_;
  std::vector<std::size_t> joint_child_link_;
  std::vector<std::vector<std::size_t>> paths_;
  std::vector<std::size_t> movable_;
  std::vector<std::size_t> movable_of_joint_;
  std::unordered_map<std::string, std::size_t> movable_index_;
  // per joint: resolved coupling terms as (movable index, gain)
  std::vector<std::vector<std::pair<std::size_t, double>>> coupling_terms_;
  std::vector<ArmSpec> arm_specs_;
  std::vector<ArmFrames> arms_;
  std::uint64_t hash_ = 0;
};

// ---------------------------------------------------------------------------

namespace detail {

inline void fnv1a(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
}
inline void fnv1a(std::uint64_t& h, double v) { fnv1a(h, &v, sizeof v); }
inline void fnv1a(std::uint64_t& h, const std::string& s) {
  fnv1a(h, s.data(), s.size());
  const unsigned char sep = 0;
  fnv1a(h, &sep, 1);
}
inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;

}  // namespace detail

inline bool KinematicChain::is_ancestor(std::size_t ancestor, std::size_t link) const {
  if (ancestor == link) return true;
  for (auto j : paths_.at(link))
    if (joint_parent_link_[j] == ancestor) return true;
  return false;
}

inline double KinematicChain::joint_value(std::size_t joint, const JointState& q) const {
  const Joint& jt = joints_[joint];
  if (!jt.moves()) return 0.0;
  if (jt.coupling) {
    double v = jt.coupling->offset;
    for (auto [src, gain] : coupling_terms_[joint]) v += gain * q[static_cast<Eigen::Index>(src)];
    return v;
  }
  return q[static_cast<Eigen::Index>(movable_of_joint_[joint])];
}

inline void KinematicChain::build(Definition def) {
  def_ = def;
  name_ = def.name;
  joints_ = std::move(def.joints);
  if (def.root_link.empty()) throw ValidationError("root link name is empty");
  links_ = {def.root_link};
  link_index_ = {{def.root_link, 0}};

  std::unordered_map<std::string, std::size_t> joint_by_name;
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    Joint& jt = joints_[j];
    if (jt.name.empty()) throw ValidationError("joint with empty name");
    if (!joint_by_name.emplace(jt.name, j).second)
      throw ValidationError("duplicate joint name '" + jt.name + "'");
    auto parent = link_index_.find(jt.parent);
    if (parent == link_index_.end())
      throw ValidationError("joint '" + jt.name + "' references unknown parent link '" + jt.parent + "'");
    if (jt.child.empty()) throw ValidationError("joint '" + jt.name + "' has empty child link");
    if (link_index_.count(jt.child))
      throw ValidationError("duplicate link name '" + jt.child + "'");
    if (!jt.origin.is_valid(1e-9))
      throw ValidationError("joint '" + jt.name + "' origin rotation is not orthonormal");
    if (jt.moves()) {
      const double n = jt.axis.norm();
      if (!(n > 1e-12)) throw ValidationError("joint '" + jt.name + "' has a zero axis");
      jt.axis /= n;
      if (!jt.coupling && !(jt.lower < jt.upper))
        throw ValidationError("joint '" + jt.name + "' has q_min >= q_max");
    }
    joint_parent_link_.push_back(parent->second);
    link_index_.emplace(jt.child, links_.size());
    joint_child_link_.push_back(links_.size());
    links_.push_back(jt.child);
  }

  paths_.assign(links_.size(), {});
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    auto path = paths_[joint_parent_link_[j]];
    path.push_back(j);
    paths_[joint_child_link_[j]] = std::move(path);
  }

  movable_of_joint_.assign(joints_.size(), npos);
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    if (joints_[j].independent()) {
      movable_index_.emplace(joints_[j].name, movable_.size());
      movable_of_joint_[j] = movable_.size();
      movable_.push_back(j);
    }
  }
  coupling_terms_.assign(joints_.size(), {});
  for (std::size_t j = 0; j < joints_.size(); ++j) {
    if (!joints_[j].moves() || !joints_[j].coupling) continue;
    for (const auto& [src, gain] : joints_[j].coupling->terms) {
      auto it = movable_index_.find(src);
      if (it == movable_index_.end())
        throw ValidationError("coupled joint '" + joints_[j].name + "' depends on '" + src +
                              "', which is not an independent joint");
      coupling_terms_[j].emplace_back(it->second, gain);
    }
  }

  // arms
  arm_specs_ = def.arms;
  for (const auto& spec : arm_specs_) {
    ArmFrames arm;
    arm.name = spec.name;
    for (const auto& other : arms_)
      if (other.name == spec.name) throw ValidationError("duplicate arm '" + spec.name + "'");
    auto need = [&](const std::string& link) {
      auto it = link_index_.find(link);
      if (it == link_index_.end())
        throw ValidationError("arm '" + spec.name + "' references unknown frame '" + link + "'");
      return it->second;
    };
    arm.arm_base = need(spec.arm_base);
    arm.lower_arm = need(spec.lower_arm);
    arm.hand = need(spec.hand);
    if (!is_ancestor(arm.arm_base, arm.lower_arm) || !is_ancestor(arm.lower_arm, arm.hand))
      throw ValidationError("arm '" + spec.name + "': frames must lie on one path arm_base -> lower_arm -> hand");

    // independent joints strictly below arm_base on the way to the hand
    std::vector<std::size_t> arm_joints;
    for (auto j : paths_[arm.hand]) {
      if (is_ancestor(arm.arm_base, joint_parent_link_[j]) && joints_[j].moves()) {
        if (joints_[j].coupling)
          throw ValidationError("arm '" + spec.name + "' contains coupled joint '" + joints_[j].name + "'");
        arm_joints.push_back(j);
      }
    }
    if (spec.wrist_joints.size() != 3)
      throw ValidationError("arm '" + spec.name + "' must declare exactly three wrist joints");
    for (const auto& wn : spec.wrist_joints) {
      auto it = movable_index_.find(wn);
      if (it == movable_index_.end())
        throw ValidationError("arm '" + spec.name + "' wrist joint '" + wn + "' is not an independent joint");
    }
    if (arm_joints.size() < 4)
      throw ValidationError("arm '" + spec.name + "' needs at least one non-wrist joint");
    const std::size_t n_pos = arm_joints.size() - 3;
    for (std::size_t k = 0; k < 3; ++k) {
      if (joints_[arm_joints[n_pos + k]].name != spec.wrist_joints[k])
        throw ValidationError("arm '" + spec.name +
                              "': wrist joints must be the last three arm joints, in order");
    }
    for (std::size_t k = 0; k < arm_joints.size(); ++k) {
      const bool below_lower_arm = is_ancestor(arm.lower_arm, joint_parent_link_[arm_joints[k]]);
      if ((k < n_pos) == below_lower_arm)
        throw ValidationError("arm '" + spec.name +
                              "': lower_arm must be the link just before the first wrist joint");
    }
    for (std::size_t k = 0; k < arm_joints.size(); ++k) {
      auto mi = movable_index_.at(joints_[arm_joints[k]].name);
      (k < n_pos ? arm.positional : arm.wrist).push_back(mi);
    }
    arms_.push_back(std::move(arm));
  }

  std::uint64_t h = detail::kFnvOffset;
  detail::fnv1a(h, links_[0]);
  for (const auto& jt : joints_) {
    detail::fnv1a(h, jt.name);
    detail::fnv1a(h, std::string(to_string(jt.kind)));
    detail::fnv1a(h, jt.parent);
    detail::fnv1a(h, jt.child);
    for (int i = 0; i < 3; ++i) detail::fnv1a(h, jt.axis[i]);
    for (int i = 0; i < 9; ++i) detail::fnv1a(h, jt.origin.rotation.data()[i]);
    for (int i = 0; i < 3; ++i) detail::fnv1a(h, jt.origin.translation[i]);
    detail::fnv1a(h, jt.lower);
    detail::fnv1a(h, jt.upper);
    if (jt.coupling) {
      detail::fnv1a(h, jt.coupling->offset);
      for (const auto& [src, gain] : jt.coupling->terms) {
        detail::fnv1a(h, src);
        detail::fnv1a(h, gain);
      }
    }
  }
  for (const auto& a : arm_specs_) {
    detail::fnv1a(h, a.name);
    detail::fnv1a(h, a.arm_base);
    detail::fnv1a(h, a.lower_arm);
    for (const auto& w : a.wrist_joints) detail::fnv1a(h, w);
    detail::fnv1a(h, a.hand);
  }
  hash_ = h;
}

inline std::uint64_t KinematicChain::arm_hash(const std::string& arm_name) const {
  const ArmFrames& a = arm(arm_name);
  std::uint64_t h = detail::kFnvOffset;
  detail::fnv1a(h, a.name);
  for (auto j : paths_.at(a.hand)) {
    if (!is_ancestor(a.arm_base, joint_parent_link_[j])) continue;
    const Joint& jt = joints_[j];
    detail::fnv1a(h, jt.name);
    detail::fnv1a(h, std::string(to_string(jt.kind)));
    for (int i = 0; i < 3; ++i) detail::fnv1a(h, jt.axis[i]);
    for (int i = 0; i < 9; ++i) detail::fnv1a(h, jt.origin.rotation.data()[i]);
    for (int i = 0; i < 3; ++i) detail::fnv1a(h, jt.origin.translation[i]);
    detail::fnv1a(h, jt.lower);
    detail::fnv1a(h, jt.upper);
  }
  detail::fnv1a(h, links_[a.arm_base]);
  detail::fnv1a(h, links_[a.lower_arm]);
  detail::fnv1a(h, links_[a.hand]);
  return h;
}

// ---------------------------------------------------------------------------
// Forward kinematics

inline void check_state(const KinematicChain& chain, const JointState& q) {
  if (static_cast<std::size_t>(q.size()) != chain.dof())
    throw ValidationError("joint state has " + std::to_string(q.size()) + " values, chain has " +
                          std::to_string(chain.dof()) + " movable joints");
}

/// Pose of `to_link` expressed in `from_link`, which must be an ancestor.
inline Pose relative_pose(const KinematicChain& chain, const JointState& q, std::size_t from_link,
                          std::size_t to_link) {
  check_state(chain, q);
  if (!chain.is_ancestor(from_link, to_link))
    throw ValidationError("frame '" + chain.links()[from_link] + "' is not an ancestor of '" +
                          chain.links()[to_link] + "'");
  Pose t;
  bool started = from_link == 0;
  for (auto j : chain.path_to(to_link)) {
    const Joint& jt = chain.joints()[j];
    if (!started) {
      // skip joints above from_link
      if (chain.joint_parent_link(j) != from_link) continue;
      started = true;
    }
    t = compose(t, jt.local_transform(chain.joint_value(j, q)));
  }
  return t;
}

inline Pose forward_kinematics(const KinematicChain& chain, const JointState& q, std::size_t link) {
  return relative_pose(chain, q, 0, link);
}

inline Pose forward_kinematics(const KinematicChain& chain, const JointState& q, const std::string& frame) {
  return forward_kinematics(chain, q, chain.link(frame));
}

/// Poses of every link in the root frame.
inline std::vector<Pose> all_link_poses(const KinematicChain& chain, const JointState& q) {
  check_state(chain, q);
  std::vector<Pose> poses(chain.links().size());
  for (std::size_t j = 0; j < chain.joints().size(); ++j) {
    const Joint& jt = chain.joints()[j];
    poses[chain.joint_child_link(j)] =
        compose(poses[chain.joint_parent_link(j)], jt.local_transform(chain.joint_value(j, q)));
  }
  return poses;
}

// ---------------------------------------------------------------------------
// Jacobian

/// Geometric Jacobian of `link` over all independent joints, in the root frame.
/// Rows are (v, omega) of the link origin. Joints off the link's path give zero
/// columns; coupled joints fold into their sources.
inline Matrix6X full_jacobian(const KinematicChain& chain, const JointState& q, std::size_t link) {
  check_state(chain, q);
  Matrix6X jac = Matrix6X::Zero(6, static_cast<Eigen::Index>(chain.dof()));
  const auto& path = chain.path_to(link);

  std::vector<Pose> frames;  // joint frames (after origin, before motion)
  frames.reserve(path.size());
  Pose t;
  for (auto j : path) {
    const Joint& jt = chain.joints()[j];
    const Pose joint_frame = compose(t, jt.origin);
    frames.push_back(joint_frame);
    t = compose(joint_frame, jt.motion(chain.joint_value(j, q)));
  }
  const Vec3 p = t.translation;

  for (std::size_t k = 0; k < path.size(); ++k) {
    const Joint& jt = chain.joints()[path[k]];
    if (!jt.moves()) continue;
    Eigen::Matrix<double, 6, 1> col;
    const Vec3 z = frames[k].rotation * jt.axis;
    if (jt.kind == JointKind::Revolute) {
      col << z.cross(p - frames[k].translation), z;
    } else {
      col << z, Vec3::Zero();
    }
    if (jt.coupling) {
      for (const auto& [src, gain] : chain.coupling_terms(path[k]))
        jac.col(static_cast<Eigen::Index>(src)) += gain * col;
    } else {
      jac.col(static_cast<Eigen::Index>(chain.movable_of_joint(path[k]))) += col;
    }
  }
  return jac;
}

/// Jacobian restricted to `active` columns, in the order given.
inline Matrix6X geometric_jacobian(const KinematicChain& chain, const JointState& q, std::size_t link,
                                   std::span<const std::size_t> active) {
  if (active.empty()) throw ValidationError("empty active joint set");
  for (auto a : active)
    if (a >= chain.dof()) throw ValidationError("active joint index " + std::to_string(a) + " out of range");
  const Matrix6X full = full_jacobian(chain, q, link);
  Matrix6X jac(6, static_cast<Eigen::Index>(active.size()));
  for (std::size_t c = 0; c < active.size(); ++c)
    jac.col(static_cast<Eigen::Index>(c)) = full.col(static_cast<Eigen::Index>(active[c]));
  return jac;
}

inline Matrix6X geometric_jacobian(const KinematicChain& chain, const JointState& q, const std::string& frame,
                                   std::span<const std::size_t> active) {
  return geometric_jacobian(chain, q, chain.link(frame), active);
}

inline JointIndexSet all_joints(const KinematicChain& chain) {
  JointIndexSet s(chain.dof());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = i;
  return s;
}

}  // namespace ikseed
