#pragma once

// Arm-initial-guess provider: hand pose (arm-base frame) -> wrist center ->
// reachability-map samples within r -> closed-form wrist angles per sample.

#include "ikseed/chain.hpp"
#include "ikseed/errors.hpp"
#include "ikseed/reachability_map.hpp"
#include "ikseed/wrist.hpp"

#include <string>
#include <vector>

namespace ikseed {

struct ArmCandidate {
  /// Arm joint values ordered as ArmFrames::all() (non-wrist, then wrist).
  Eigen::VectorXd q_arm;
  /// Distance between the sample's wrist center and the target wrist center.
  /// Orientation is solved exactly, so this is also the hand position error.
  double center_error = 0.0;
  std::uint32_t sample = 0;
  WristSolution::Branch branch = WristSolution::Branch::Primary;

  void apply_to(JointState& q, const ArmFrames& arm) const {
    const JointIndexSet idx = arm.all();
    for (std::size_t k = 0; k < idx.size(); ++k)
      q[static_cast<Eigen::Index>(idx[k])] = q_arm[static_cast<Eigen::Index>(k)];
  }
};

/// Binds a map to the chain and arm it was built for.
class ArmGuessProvider {
 public:
  ArmGuessProvider(const KinematicChain& chain, const ReachabilityMap& map, const std::string& arm)
      : chain_(&chain), map_(&map), arm_(&chain.arm(arm)), wrist_(wrist_geometry(chain, *arm_)) {
    if (map.arm() != arm) throw ValidationError("reachability map is for arm '" + map.arm() + "', not '" + arm + "'");
    if (!map.matches(chain))
      throw ValidationError("reachability map was built for a different arm geometry (hash mismatch)");
    if (map.partial_dof() != arm_->positional.size())
      throw ValidationError("reachability map joint count does not match the arm");
  }

  const ArmFrames& arm() const { return *arm_; }
  const WristGeometry& wrist() const { return wrist_; }
  const ReachabilityMap& map() const { return *map_; }

  Vec3 wrist_center(const Pose& hand_in_arm_base) const {
    return ikseed::wrist_center(hand_in_arm_base, wrist_.hand_offset);
  }

  /// Candidates ordered by center error, then sample index, then branch.
  std::vector<ArmCandidate> candidates(const Pose& hand_in_arm_base, double r) const {
    std::vector<ArmCandidate> out;
    const auto hits = map_->query(wrist_center(hand_in_arm_base), r);
    const std::size_t n = arm_->positional.size();
    for (const auto& hit : hits) {
      const MapSample s = map_->sample(hit.sample);
      const Mat3 lower_to_hand = s.lower_arm_rotation().transpose() * hand_in_arm_base.rotation;
      for (const auto& sol : solve_zxz(wrist_.canonical(lower_to_hand), wrist_.limits)) {
        ArmCandidate c;
        c.q_arm.resize(static_cast<Eigen::Index>(n + 3));
        for (std::size_t k = 0; k < n; ++k) c.q_arm[static_cast<Eigen::Index>(k)] = s.q_partial[k];
        for (std::size_t k = 0; k < 3; ++k) c.q_arm[static_cast<Eigen::Index>(n + k)] = sol.angles[k];
        c.center_error = hit.distance;
        c.sample = hit.sample;
        c.branch = sol.branch;
        out.push_back(std::move(c));
      }
    }
    return out;
  }

 private:
  const KinematicChain* chain_;
  const ReachabilityMap* map_;
  const ArmFrames* arm_;
  WristGeometry wrist_;
};

inline std::vector<ArmCandidate> arm_candidates(const ReachabilityMap& map, const KinematicChain& chain,
                                                const std::string& arm, const Pose& hand_in_arm_base, double r) {
  return ArmGuessProvider(chain, map, arm).candidates(hand_in_arm_base, r);
}

}  // namespace ikseed
