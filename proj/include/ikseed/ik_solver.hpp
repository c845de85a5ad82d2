#pragma once

// Damped-least-squares (Levenberg-Marquardt) IK over a subset of joints, with
// per-step clamping to joint limits, and a trajectory driver that seeds each
// step from a supplied seed or the previous solution.

#include "ikseed/chain.hpp"
#include "ikseed/errors.hpp"
#include "ikseed/pose.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace ikseed {

struct IKTarget {
  std::size_t link = 0;
  Pose pose;
  bool position_only = false;
};

struct IKTolerances {
  double position = 1e-4;     // m
  double orientation = 1e-3;  // rad
};

struct IKRequest {
  JointIndexSet active;
  JointState seed;
  std::vector<IKTarget> targets;
  IKTolerances tolerances;
  int max_iterations = 200;
  double lambda0 = 1e-3;
  double w = 1.0;  // orientation rows are divided by w
};

enum class IKStatus { Success, MaxIterations, Stalled };

inline const char* to_string(IKStatus s) {
  switch (s) {
    case IKStatus::Success: return "success";
    case IKStatus::MaxIterations: return "max_iters";
    case IKStatus::Stalled: return "stalled";
  }
  return "?";
}

struct IKOutcome {
  IKStatus status = IKStatus::MaxIterations;
  JointState solution;
  double position_residual = 0.0;
  double orientation_residual = 0.0;
  int iterations = 0;

  bool success() const { return status == IKStatus::Success; }
};

namespace detail {

struct IKResidual {
  Eigen::VectorXd e;  // stacked weighted error
  double position = 0.0;
  double orientation = 0.0;
};

inline Eigen::Index task_rows(const std::vector<IKTarget>& targets) {
  Eigen::Index rows = 0;
  for (const auto& t : targets) rows += t.position_only ? 3 : 6;
  return rows;
}

inline IKResidual ik_residual(const KinematicChain& chain, const JointState& q, const std::vector<IKTarget>& targets,
                              double w) {
  IKResidual r;
  r.e.resize(task_rows(targets));
  Eigen::Index row = 0;
  for (const auto& t : targets) {
    const Pose cur = forward_kinematics(chain, q, t.link);
    const Vec3 dp = t.pose.translation - cur.translation;
    r.e.segment<3>(row) = dp;
    r.position = std::max(r.position, dp.norm());
    row += 3;
    if (!t.position_only) {
      const Vec3 dw = rotation_log(t.pose.rotation * cur.rotation.transpose());
      r.e.segment<3>(row) = dw / w;
      r.orientation = std::max(r.orientation, dw.norm());
      row += 3;
    }
  }
  return r;
}

inline Eigen::MatrixXd ik_jacobian(const KinematicChain& chain, const JointState& q,
                                   const std::vector<IKTarget>& targets, const JointIndexSet& active, double w) {
  Eigen::MatrixXd jac(task_rows(targets), static_cast<Eigen::Index>(active.size()));
  Eigen::Index row = 0;
  for (const auto& t : targets) {
    const Matrix6X j = geometric_jacobian(chain, q, t.link, active);
    jac.middleRows(row, 3) = j.topRows(3);
    row += 3;
    if (!t.position_only) {
      jac.middleRows(row, 3) = j.bottomRows(3) / w;
      row += 3;
    }
  }
  return jac;
}

}  // namespace detail

inline IKOutcome solve(const KinematicChain& chain, const IKRequest& req) {
  check_state(chain, req.seed);
  if (req.active.empty()) throw ValidationError("IK needs at least one active joint");
  if (req.targets.empty()) throw ValidationError("IK needs at least one target");
  if (!(req.tolerances.position > 0.0) || !(req.tolerances.orientation > 0.0))
    throw ValidationError("IK tolerances must be positive");
  if (!chain.within_limits(req.seed, 1e-9)) throw ValidationError("IK seed violates joint limits");

  constexpr double kLambdaMin = 1e-9;
  constexpr double kLambdaMax = 1e3;
  constexpr double kMinStep = 1e-12;

  IKOutcome out;
  JointState q = chain.clamp(req.seed);
  auto res = detail::ik_residual(chain, q, req.targets, req.w);
  auto converged = [&](const detail::IKResidual& r) {
    return r.position <= req.tolerances.position && r.orientation <= req.tolerances.orientation;
  };
  auto finish = [&](IKStatus status, int iterations) {
    out.status = status;
    out.solution = q;
    out.position_residual = res.position;
    out.orientation_residual = res.orientation;
    out.iterations = iterations;
    return out;
  };
  if (converged(res)) return finish(IKStatus::Success, 0);

  double lambda = std::clamp(req.lambda0, kLambdaMin, kLambdaMax);
  double err = res.e.squaredNorm();
  for (int it = 1; it <= req.max_iterations; ++it) {
    const Eigen::MatrixXd jac = detail::ik_jacobian(chain, q, req.targets, req.active, req.w);
    Eigen::MatrixXd a = jac * jac.transpose();
    a.diagonal().array() += lambda;
    const Eigen::VectorXd dq = jac.transpose() * a.ldlt().solve(res.e);
    if (!(dq.norm() >= kMinStep)) return finish(IKStatus::Stalled, it);

    JointState trial = q;
    for (std::size_t k = 0; k < req.active.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(req.active[k]);
      trial[i] = std::clamp(trial[i] + dq[static_cast<Eigen::Index>(k)], chain.lower(req.active[k]),
                            chain.upper(req.active[k]));
    }
    const auto trial_res = detail::ik_residual(chain, trial, req.targets, req.w);
    const double trial_err = trial_res.e.squaredNorm();
    if (trial_err < err) {
      q = trial;
      res = trial_res;
      err = trial_err;
      lambda = std::max(lambda / 10.0, kLambdaMin);
      if (converged(res)) return finish(IKStatus::Success, it);
    } else {
      if (lambda >= kLambdaMax) return finish(IKStatus::Stalled, it);
      lambda = std::min(lambda * 10.0, kLambdaMax);
    }
  }
  return finish(IKStatus::MaxIterations, req.max_iterations);
}

struct TrajectoryRequest {
  JointIndexSet active;
  std::map<std::size_t, JointState> seeds;      // step -> seed
  std::vector<std::vector<IKTarget>> targets;   // per step
  IKTolerances tolerances;
  int max_iterations = 200;
  double lambda0 = 1e-3;
  double w = 1.0;
};

/// Solves steps in order; stops after the first failed step.
inline std::vector<IKOutcome> solve_trajectory(const KinematicChain& chain, const TrajectoryRequest& req) {
  if (!req.seeds.count(0)) throw ValidationError("trajectory needs a seed for step 0");
  std::vector<IKOutcome> outcomes;
  outcomes.reserve(req.targets.size());
  JointState prev;
  for (std::size_t k = 0; k < req.targets.size(); ++k) {
    IKRequest step;
    step.active = req.active;
    auto it = req.seeds.find(k);
    step.seed = it != req.seeds.end() ? it->second : prev;
    step.targets = req.targets[k];
    step.tolerances = req.tolerances;
    step.max_iterations = req.max_iterations;
    step.lambda0 = req.lambda0;
    step.w = req.w;
    outcomes.push_back(solve(chain, step));
    if (!outcomes.back().success()) break;
    prev = outcomes.back().solution;
  }
  return outcomes;
}

}  // namespace ikseed
