#pragma once

// Seed-quality evaluation: perturb every IK target, solve the trajectory from
// each seed set, and count per-step successes with the gating rule (a failed
// step cancels the rest of the trial). Trial t draws its perturbations from a
// stream derived from (rng_seed, t) only, so every seed set sees the same
// targets.

#include "ikseed/chain.hpp"
#include "ikseed/errors.hpp"
#include "ikseed/ik_solver.hpp"
#include "ikseed/parallel.hpp"
#include "ikseed/pose.hpp"
#include "ikseed/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ikseed {

struct PerturbationSpec {
  double position_range = 0.07;                                   // +- m per axis
  double orientation_range = 5.0 * std::numbers::pi / 180.0;      // +- rad per RPY axis
  void validate() const {
    if (!(position_range >= 0.0) || !(orientation_range >= 0.0))
      throw ValidationError("perturbation ranges must be non-negative");
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent generator for one trial.
inline std::mt19937_64 trial_rng(std::uint64_t rng_seed, std::uint64_t trial) {
  return std::mt19937_64(splitmix64(splitmix64(rng_seed) ^ trial));
}

namespace detail {
// uniform in [-1, 1); spelled out so the stream does not depend on the library's distributions
inline double symmetric_unit(std::mt19937_64& rng) {
  return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
}
}  // namespace detail

/// Uniform offsets per axis; the RPY offset rotation is applied in the world frame.
/// Always consumes six draws so streams stay aligned whatever the ranges are.
inline Pose perturb(const Pose& target, const PerturbationSpec& spec, std::mt19937_64& rng) {
  Vec3 dp;
  for (int a = 0; a < 3; ++a) dp[a] = detail::symmetric_unit(rng) * spec.position_range;
  double drpy[3];
  for (double& v : drpy) v = detail::symmetric_unit(rng) * spec.orientation_range;
  Pose out = target;
  out.translation += dp;
  if (spec.orientation_range > 0.0) out.rotation = rpy(drpy[0], drpy[1], drpy[2]) * target.rotation;
  return out;
}

struct SeedSet {
  std::string label;
  std::optional<std::size_t> generation;
  double fitness = 0.0;
  std::map<std::size_t, JointState> seeds;  // step -> state
};

struct StepCount {
  std::size_t successes = 0;
  std::size_t attempts = 0;
  double ratio() const { return attempts ? static_cast<double>(successes) / static_cast<double>(attempts) : 0.0; }
};

struct EvalReport {
  std::string label;
  std::optional<std::size_t> generation;
  double fitness = 0.0;
  std::size_t trials = 0;
  std::vector<StepCount> steps;
  std::size_t trajectory_successes = 0;
  /// Leading steps solved in each trial.
  std::vector<std::size_t> solved_steps;

  StepCount total() const {
    StepCount t;
    for (const auto& s : steps) {
      t.successes += s.successes;
      t.attempts += s.attempts;
    }
    return t;
  }
  double trajectory_ratio() const {
    return trials ? static_cast<double>(trajectory_successes) / static_cast<double>(trials) : 0.0;
  }
};

/// What the solver needs from a scenario.
struct EvalProblem {
  const KinematicChain* chain = nullptr;
  JointIndexSet active;
  /// per step, (hand link, nominal world pose) for every target
  std::vector<std::vector<std::pair<std::size_t, Pose>>> steps;
  std::vector<std::size_t> seeded_steps;
  IKTolerances tolerances;
  int max_iterations = 200;
  double w = 1.0;
};

inline EvalProblem eval_problem(const Scenario& sc, const KinematicChain& chain) {
  EvalProblem p;
  p.chain = &chain;
  p.active = chain.movable_indices(sc.online_dof);
  for (const auto& step : sc.trajectory) {
    std::vector<std::pair<std::size_t, Pose>> targets;
    for (const auto& t : step) targets.emplace_back(chain.arm(t.arm).hand, t.pose);
    p.steps.push_back(std::move(targets));
  }
  p.seeded_steps = sc.seeded_steps();
  std::sort(p.seeded_steps.begin(), p.seeded_steps.end());
  p.tolerances = {sc.ik.position_tolerance, sc.ik.orientation_tolerance};
  p.max_iterations = sc.ik.max_iterations;
  p.w = sc.w;
  return p;
}

/// Perturbed targets of one trial, step-major then target order.
inline std::vector<std::vector<IKTarget>> trial_targets(const EvalProblem& p, const PerturbationSpec& spec,
                                                        std::uint64_t rng_seed, std::size_t trial) {
  auto rng = trial_rng(rng_seed, trial);
  std::vector<std::vector<IKTarget>> out;
  for (const auto& step : p.steps) {
    std::vector<IKTarget> targets;
    for (const auto& [link, pose] : step) targets.push_back({link, perturb(pose, spec, rng), false});
    out.push_back(std::move(targets));
  }
  return out;
}

inline std::vector<EvalReport> evaluate(const EvalProblem& p, const std::vector<SeedSet>& sets,
                                        const PerturbationSpec& spec, std::size_t trials, std::uint64_t rng_seed,
                                        unsigned threads = 1) {
  spec.validate();
  if (trials < 1) throw ValidationError("evaluation needs at least one trial");
  if (sets.empty()) throw ValidationError("evaluation needs at least one seed set");
  for (const auto& s : sets) {
    for (auto step : p.seeded_steps)
      if (!s.seeds.count(step))
        throw ValidationError("seed set '" + s.label + "' has no seed for step " + std::to_string(step));
    for (const auto& [step, q] : s.seeds) {
      if (step >= p.steps.size())
        throw ValidationError("seed set '" + s.label + "' seeds a step beyond the trajectory");
      check_state(*p.chain, q);
    }
  }

  const std::size_t n_steps = p.steps.size();
  // solved[set][trial] = number of leading steps that succeeded
  std::vector<std::vector<std::size_t>> solved(sets.size(), std::vector<std::size_t>(trials, 0));
  parallel_for(trials, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      TrajectoryRequest req;
      req.active = p.active;
      req.targets = trial_targets(p, spec, rng_seed, t);
      req.tolerances = p.tolerances;
      req.max_iterations = p.max_iterations;
      req.w = p.w;
      for (std::size_t s = 0; s < sets.size(); ++s) {
        req.seeds = sets[s].seeds;
        const auto outcomes = solve_trajectory(*p.chain, req);
        std::size_t ok = 0;
        while (ok < outcomes.size() && outcomes[ok].success()) ++ok;
        solved[s][t] = ok;
      }
    }
  });

  std::vector<EvalReport> reports;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    EvalReport r;
    r.label = sets[s].label;
    r.generation = sets[s].generation;
    r.fitness = sets[s].fitness;
    r.trials = trials;
    r.steps.assign(n_steps, {});
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t ok = solved[s][t];
      for (std::size_t k = 0; k < n_steps && k <= ok; ++k) {
        ++r.steps[k].attempts;
        if (k < ok) ++r.steps[k].successes;
      }
      if (ok == n_steps) ++r.trajectory_successes;
    }
    r.solved_steps = solved[s];
    reports.push_back(std::move(r));
  }
  return reports;
}

// ---- fitness vs. success

/// Ranks with ties averaged (1-based).
inline std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  return rank;
}

/// Spearman correlation (Pearson on average ranks); empty when either side is constant.
inline std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for k successes out of n.
inline Interval wilson(std::size_t k, std::size_t n, double z = 1.96) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double denom = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  // the bounds at k = 0 and k = n are exactly 0 and 1, round-off aside
  return {k == 0 ? 0.0 : std::max(0.0, centre - half), k == n ? 1.0 : std::min(1.0, centre + half)};
}

/// Newcombe's hybrid score interval for p2 - p1.
inline Interval difference_interval(const StepCount& a, const StepCount& b, double z = 1.96) {
  const double p1 = a.ratio(), p2 = b.ratio();
  const Interval w1 = wilson(a.successes, a.attempts, z), w2 = wilson(b.successes, b.attempts, z);
  const double d = p2 - p1;
  return {d - std::sqrt((p2 - w2.lo) * (p2 - w2.lo) + (w1.hi - p1) * (w1.hi - p1)),
          d + std::sqrt((w2.hi - p2) * (w2.hi - p2) + (p1 - w1.lo) * (p1 - w1.lo))};
}

struct PairDelta {
  std::size_t from = 0;  // report index
  std::size_t to = 0;
  double delta = 0.0;    // total ratio of `to` minus `from`
  Interval ci;
  /// Trials where exactly one of the two completed the whole trajectory.
  std::size_t only_from = 0;
  std::size_t only_to = 0;
};

struct TrendSummary {
  std::optional<double> spearman;
  std::vector<PairDelta> pairs;
};

/// Pairs are taken in ascending-fitness order between neighbours, plus lowest vs highest.
inline TrendSummary fitness_vs_success(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2) throw ValidationError("fitness_vs_success needs at least two seed sets");
  TrendSummary s;
  std::vector<double> fit, ratio;
  for (const auto& r : reports) {
    fit.push_back(r.fitness);
    ratio.push_back(r.total().ratio());
  }
  s.spearman = spearman(fit, ratio);
  std::vector<std::size_t> order(reports.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });
  auto add = [&](std::size_t a, std::size_t b) {
    PairDelta d;
    d.from = a;
    d.to = b;
    const StepCount ta = reports[a].total(), tb = reports[b].total();
    d.delta = tb.ratio() - ta.ratio();
    d.ci = difference_interval(ta, tb);
    const auto& x = reports[a].solved_steps;
    const auto& y = reports[b].solved_steps;
    const std::size_t full = reports[a].steps.size();
    for (std::size_t t = 0; t < x.size() && t < y.size(); ++t) {
      d.only_from += x[t] == full && y[t] != full;
      d.only_to += x[t] != full && y[t] == full;
    }
    s.pairs.push_back(d);
  };
  for (std::size_t i = 0; i + 1 < order.size(); ++i) add(order[i], order[i + 1]);
  if (order.size() > 2) add(order.front(), order.back());
  return s;
}

// ---- report files

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string fmt_ratio(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

/// One row per step, one column group per seed set (Tables I/III layout).
inline std::string per_step_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "step";
  for (const auto& r : reports) os << ',' << r.label << "_successes," << r.label << "_attempts," << r.label << "_ratio";
  os << '\n';
  const std::size_t n = reports.empty() ? 0 : reports.front().steps.size();
  for (std::size_t k = 0; k < n; ++k) {
    os << k;
    for (const auto& r : reports)
      os << ',' << r.steps[k].successes << ',' << r.steps[k].attempts << ',' << fmt_ratio(r.steps[k].ratio());
    os << '\n';
  }
  return os.str();
}

inline std::string totals_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "label,generation,fitness,trials,trajectory_successes,trajectory_ratio,ik_successes,ik_attempts,ik_ratio\n";
  for (const auto& r : reports) {
    const StepCount t = r.total();
    os << r.label << ',' << (r.generation ? std::to_string(*r.generation) : std::string()) << ','
       << fmt_double(r.fitness) << ',' << r.trials << ',' << r.trajectory_successes << ','
       << fmt_ratio(r.trajectory_ratio()) << ',' << t.successes << ',' << t.attempts << ',' << fmt_ratio(t.ratio())
       << '\n';
  }
  return os.str();
}

inline std::string fitness_history_csv(const std::vector<double>& history) {
  std::ostringstream os;
  os << "generation,best_fitness\n";
  for (std::size_t g = 0; g < history.size(); ++g) os << g << ',' << fmt_double(history[g]) << '\n';
  return os.str();
}

inline nlohmann::json report_json(const std::vector<EvalReport>& reports, const std::optional<TrendSummary>& trend) {
  using nlohmann::json;
  json j;
  j["seed_sets"] = json::array();
  for (const auto& r : reports) {
    json jr;
    jr["label"] = r.label;
    jr["generation"] = r.generation ? json(*r.generation) : json(nullptr);
    jr["fitness"] = r.fitness;
    jr["trials"] = r.trials;
    jr["steps"] = json::array();
    for (const auto& s : r.steps) jr["steps"].push_back({{"successes", s.successes}, {"attempts", s.attempts}});
    jr["trajectory_successes"] = r.trajectory_successes;
    const StepCount t = r.total();
    jr["total"] = {{"successes", t.successes}, {"attempts", t.attempts}, {"ratio", t.ratio()}};
    j["seed_sets"].push_back(jr);
  }
  if (trend) {
    json jt;
    jt["spearman"] = trend->spearman ? json(*trend->spearman) : json(nullptr);
    jt["pairs"] = json::array();
    for (const auto& p : trend->pairs)
      jt["pairs"].push_back({{"from", reports[p.from].label},
                             {"to", reports[p.to].label},
                             {"delta_total_ratio", p.delta},
                             {"ci95", {p.ci.lo, p.ci.hi}},
                             {"trajectory_only_from", p.only_from},
                             {"trajectory_only_to", p.only_to}});
    j["comparison"] = jt;
  }
  return j;
}

}  // namespace ikseed
