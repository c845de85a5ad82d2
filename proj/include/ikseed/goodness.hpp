#pragma once

// Joint-limit-aware manipulability: every active Jacobian column is weighted by
// the joint's clipped distance to its nearest limit, orientation rows are
// divided by the position/orientation ratio w, and the goodness value is the
// manipulability index sqrt(det(Js Js^T)) of the scaled matrix.

#include "ikseed/chain.hpp"
#include "ikseed/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <vector>

namespace ikseed {

struct GoodnessParams {
  double d_max = 0.25;  // rad (m for prismatic joints)
  double w = 1.0;       // m per rad
  /// Per-joint clipping overrides keyed by movable index.
  std::map<std::size_t, double> d_max_override;

  double clip_for(std::size_t joint) const {
    auto it = d_max_override.find(joint);
    return it == d_max_override.end() ? d_max : it->second;
  }
  void validate() const {
    if (!(d_max > 0.0)) throw ValidationError("goodness d_max must be positive");
    if (!(w > 0.0)) throw ValidationError("goodness w must be positive");
    for (const auto& [j, d] : d_max_override)
      if (!(d > 0.0)) throw ValidationError("per-joint d_max must be positive");
  }
};

struct LimitDistances {
  Eigen::VectorXd d;
  /// Set when some active joint sits outside its limits (its distance is 0).
  bool out_of_limits = false;
};

inline LimitDistances limit_distances(const JointState& q, const KinematicChain& chain,
                                      std::span<const std::size_t> active, const GoodnessParams& params) {
  check_state(chain, q);
  LimitDistances out;
  out.d.resize(static_cast<Eigen::Index>(active.size()));
  for (std::size_t k = 0; k < active.size(); ++k) {
    const std::size_t i = active[k];
    const double qi = q[static_cast<Eigen::Index>(i)];
    const double lo = chain.lower(i);
    const double hi = chain.upper(i);
    if (qi < lo || qi > hi) out.out_of_limits = true;
    const double d = std::min({hi - qi, qi - lo, params.clip_for(i)});
    out.d[static_cast<Eigen::Index>(k)] = std::max(d, 0.0);
  }
  return out;
}

inline LimitDistances limit_distances(const JointState& q, const KinematicChain& chain,
                                      std::span<const std::size_t> active, double d_max) {
  GoodnessParams p;
  p.d_max = d_max;
  return limit_distances(q, chain, active, p);
}

/// diag(1,1,1,1/w,1/w,1/w) * J * diag(d).
inline Eigen::MatrixXd scaled_jacobian(const Eigen::MatrixXd& jac, const Eigen::VectorXd& d, double w) {
  if (jac.rows() != 6) throw ValidationError("scaled_jacobian expects a 6-row Jacobian");
  if (d.size() != jac.cols()) throw ValidationError("limit distance count does not match Jacobian columns");
  if (!(w > 0.0)) throw ValidationError("w must be positive");
  Eigen::MatrixXd out = jac * d.asDiagonal();
  out.bottomRows(3) /= w;
  return out;
}

/// sqrt(det(M M^T)) for a 6 x n matrix. Zero whenever rank < 6.
///
/// A square matrix goes through |det| from a partially pivoted LU, which keeps
/// an exactly zero column exactly zero. Wide matrices factor M M^T with LDL^T
/// and clamp round-off below 1e-300 (or negative pivots) to zero.
inline double manipulability(const Eigen::MatrixXd& m) {
  if (m.rows() != 6) throw ValidationError("manipulability expects 6 rows");
  if (m.cols() < 6) return 0.0;
  if (m.cols() == 6) return std::abs(Eigen::Matrix<double, 6, 6>(m).partialPivLu().determinant());
  const Eigen::Matrix<double, 6, 6> g = m * m.transpose();
  const Eigen::LDLT<Eigen::Matrix<double, 6, 6>> ldlt(g);
  double det = 1.0;
  for (int i = 0; i < 6; ++i) {
    const double p = ldlt.vectorD()[i];
    if (!(p > 0.0)) return 0.0;
    det *= p;
  }
  if (det < 1e-300) return 0.0;
  return std::sqrt(det);
}

struct GoodnessResult {
  double value = 0.0;
  bool out_of_limits = false;
};

inline GoodnessResult goodness_detail(const KinematicChain& chain, const JointState& q,
                                      std::span<const std::size_t> active, std::size_t hand_link,
                                      const GoodnessParams& params) {
  if (active.empty()) throw ValidationError("goodness needs at least one active joint");
  const LimitDistances dist = limit_distances(q, chain, active, params);
  const Matrix6X jac = geometric_jacobian(chain, q, hand_link, active);
  return {manipulability(scaled_jacobian(jac, dist.d, params.w)), dist.out_of_limits};
}

inline double goodness(const KinematicChain& chain, const JointState& q, std::span<const std::size_t> active,
                       std::size_t hand_link, const GoodnessParams& params) {
  return goodness_detail(chain, q, active, hand_link, params).value;
}

inline double goodness(const KinematicChain& chain, const JointState& q, std::span<const std::size_t> active,
                       const std::string& hand_frame, const GoodnessParams& params) {
  return goodness(chain, q, active, chain.link(hand_frame), params);
}

}  // namespace ikseed
