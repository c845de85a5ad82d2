#pragma once

// IK seed generator. A gene carries trunk / base values (shared across goals or
// one per goal); the arms are filled in from the reachability map, the best
// candidate per arm is the one with the highest goodness, and the fitness of
// the gene is the smallest (weighted) best goodness over all goals and arms.

#include "ikseed/arm_guess.hpp"
#include "ikseed/chain.hpp"
#include "ikseed/errors.hpp"
#include "ikseed/ga.hpp"
#include "ikseed/goodness.hpp"
#include "ikseed/map_io.hpp"
#include "ikseed/model_io.hpp"
#include "ikseed/reachability_map.hpp"
#include "ikseed/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

namespace ikseed {

struct TargetChoice {
  std::string arm;
  double goodness = 0.0;
  double center_error = 0.0;
  std::size_t candidates = 0;
};

struct GoalState {
  std::string label;
  std::size_t step = 0;
  JointState state;
  /// min over targets of the unweighted best goodness
  double goodness = 0.0;
  std::vector<TargetChoice> targets;
};

/// Scenario bound to a loaded chain and its maps. Immutable; fitness() is
/// safe to call from several threads.
class SeedProblem {
 public:
  SeedProblem(const Scenario& scenario, const KinematicChain& chain, std::map<std::string, ReachabilityMap> maps)
      : scenario_(&scenario), chain_(&chain), maps_(std::move(maps)) {
    params_.d_max = scenario.d_max;
    params_.w = scenario.w;
    for (const auto& [name, d] : scenario.d_max_per_joint) params_.d_max_override[chain.movable_index(name)] = d;
    params_.validate();

    online_ = chain.movable_indices(scenario.online_dof);
    if (std::set<std::size_t>(online_.begin(), online_.end()).size() != online_.size())
      throw ValidationError("scenario: online_dof lists a joint twice");

    base_ = chain.neutral_state();
    std::set<std::size_t> taken;
    for (const auto& [name, v] : scenario.fixed_dof) {
      const std::size_t i = chain.movable_index(name);
      if (v < chain.lower(i) || v > chain.upper(i))
        throw ValidationError("scenario: fixed_dof '" + name + "' is outside its joint limits");
      base_[static_cast<Eigen::Index>(i)] = v;
      taken.insert(i);
    }
    for (const auto& gv : scenario.gene_vars) {
      const std::size_t i = chain.movable_index(gv.dof);
      if (!taken.insert(i).second) throw ValidationError("scenario: '" + gv.dof + "' is both a gene and fixed/gene twice");
      if (gv.lo < chain.lower(i) || gv.hi > chain.upper(i))
        throw ValidationError("scenario: gene range of '" + gv.dof + "' exceeds its joint limits");
      gene_joint_.push_back(i);
    }

    for (const auto& goal : scenario.goals)
      for (const auto& t : goal.targets) {
        if (providers_.count(t.arm)) continue;
        const ArmFrames& arm = chain.arm(t.arm);
        for (auto i : arm.all())
          if (taken.count(i)) throw ValidationError("scenario: arm joint '" + chain.movable(i).name + "' is a gene or fixed DOF");
        auto it = maps_.find(t.arm);
        if (it == maps_.end()) throw ValidationError("scenario: no reachability map for arm '" + t.arm + "'");
        providers_.emplace(t.arm, std::make_unique<ArmGuessProvider>(chain, it->second, t.arm));
      }
  }

  SeedProblem(const SeedProblem&) = delete;
  SeedProblem& operator=(const SeedProblem&) = delete;

  const Scenario& scenario() const { return *scenario_; }
  const KinematicChain& chain() const { return *chain_; }
  const GoodnessParams& goodness_params() const { return params_; }
  const JointIndexSet& online() const { return online_; }
  std::vector<GeneRange> ranges() const { return scenario_->gene_ranges(); }

  /// Gene values plus fixed DOF for one goal; arm joints stay neutral.
  JointState trunk_state(const Gene& gene, std::size_t goal) const {
    if (gene.size() != scenario_->gene_size()) throw ValidationError("gene length does not match the scenario");
    JointState q = base_;
    std::size_t slot = 0;
    for (std::size_t v = 0; v < gene_joint_.size(); ++v) {
      const bool per_goal = scenario_->gene_vars[v].per_goal;
      q[static_cast<Eigen::Index>(gene_joint_[v])] = gene[slot + (per_goal ? goal : 0)];
      slot += per_goal ? scenario_->goals.size() : 1;
    }
    return q;
  }

  /// Fills every arm of the goal with its best candidate. Empty when some arm has no candidate.
  std::optional<GoalState> goal_state(const Gene& gene, std::size_t goal) const {
    const Goal& g = scenario_->goals.at(goal);
    GoalState out;
    out.label = g.label;
    out.step = g.step;
    out.state = trunk_state(gene, goal);
    out.goodness = std::numeric_limits<double>::infinity();
    for (const auto& t : g.targets) {
      const ArmGuessProvider& provider = *providers_.at(t.arm);
      const ArmFrames& arm = provider.arm();
      const Pose arm_base = forward_kinematics(*chain_, out.state, arm.arm_base);
      const auto cands = provider.candidates(inverse(arm_base) * t.pose, scenario_->query_radius);
      if (cands.empty()) return std::nullopt;
      JointState q = out.state;
      double best = -1.0;
      std::size_t best_k = 0;
      for (std::size_t k = 0; k < cands.size(); ++k) {
        cands[k].apply_to(q, arm);
        const double f = goodness(*chain_, q, online_, arm.hand, params_);
        if (f > best) {
          best = f;
          best_k = k;
        }
      }
      cands[best_k].apply_to(out.state, arm);
      out.targets.push_back({t.arm, best, cands[best_k].center_error, cands.size()});
      out.goodness = std::min(out.goodness, best);
    }
    return out;
  }

  double fitness(const Gene& gene) const {
    double f = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < scenario_->goals.size(); ++k) {
      const auto gs = goal_state(gene, k);
      if (!gs) return -std::numeric_limits<double>::infinity();
      for (const auto& t : gs->targets) f = std::min(f, scenario_->goals[k].weight * t.goodness);
    }
    return f;
  }

  std::vector<GoalState> goal_states(const Gene& gene) const {
    std::vector<GoalState> out;
    for (std::size_t k = 0; k < scenario_->goals.size(); ++k) {
      auto gs = goal_state(gene, k);
      if (!gs) throw InfeasibleError("gene leaves goal '" + scenario_->goals[k].label + "' without arm candidates");
      out.push_back(std::move(*gs));
    }
    return out;
  }

 private:
  const Scenario* scenario_;
  const KinematicChain* chain_;
  std::map<std::string, ReachabilityMap> maps_;
  std::map<std::string, std::unique_ptr<ArmGuessProvider>> providers_;
  GoodnessParams params_;
  JointIndexSet online_;
  JointState base_;
  std::vector<std::size_t> gene_joint_;
};

struct SeedResult {
  std::string scenario;
  std::size_t generation = 0;  // generation this gene was taken from
  std::size_t best_generation = 0;
  double fitness = 0.0;
  Gene gene;
  std::vector<std::string> joint_names;
  std::vector<std::string> online_dof;
  std::vector<GoalState> goals;
  std::vector<double> fitness_history;

  /// step -> seed state
  std::map<std::size_t, JointState> seeds() const {
    std::map<std::size_t, JointState> s;
    for (const auto& g : goals) s[g.step] = g.state;
    return s;
  }
};

/// Runs the GA and returns the overall best plus the full GA record.
struct Evolution {
  GAResult ga;
  SeedResult best;
};

inline SeedResult seed_result_at(const SeedProblem& problem, const GAResult& ga, std::size_t generation) {
  if (ga.generations() == 0) throw ValidationError("empty GA history");
  generation = std::min(generation, ga.generations() - 1);
  SeedResult r;
  r.scenario = problem.scenario().name;
  r.generation = generation;
  r.best_generation = ga.best_generation;
  r.fitness = ga.fitness_history[generation];
  r.gene = ga.gene_history[generation];
  r.joint_names = problem.chain().movable_names();
  r.online_dof = problem.scenario().online_dof;
  r.goals = problem.goal_states(r.gene);
  r.fitness_history.assign(ga.fitness_history.begin(), ga.fitness_history.begin() + static_cast<long>(generation) + 1);
  return r;
}

inline Evolution evolve(const SeedProblem& problem, unsigned threads = 1) {
  Evolution e;
  e.ga = evolve(problem.ranges(), problem.scenario().ga, [&](const Gene& g) { return problem.fitness(g); }, threads);
  e.best = seed_result_at(problem, e.ga, e.ga.generations() - 1);
  return e;
}

/// Loads the chain and every map named by the scenario.
struct LoadedScenario {
  Scenario scenario;
  KinematicChain chain;
  std::map<std::string, ReachabilityMap> maps;
};

inline LoadedScenario load_scenario_inputs(const std::filesystem::path& scenario_path,
                                           const std::map<std::string, std::filesystem::path>& map_overrides = {}) {
  LoadedScenario s;
  s.scenario = load_scenario(scenario_path);
  for (const auto& [arm, p] : map_overrides) s.scenario.maps[arm] = p;
  s.chain = load_chain_file(s.scenario.model_path, s.scenario.model_options);
  for (const auto& [arm, p] : s.scenario.maps) s.maps.emplace(arm, load_map(p));
  return s;
}

// ---- JSON

inline constexpr const char* kSeedFormat = "ikseed-seed/1";

inline nlohmann::json state_json(const JointState& q) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < q.size(); ++i) a.push_back(q[i]);
  return a;
}

inline nlohmann::json to_json(const SeedResult& r) {
  using nlohmann::json;
  json j;
  j["format"] = kSeedFormat;
  j["scenario"] = r.scenario;
  j["generation"] = r.generation;
  j["best_generation"] = r.best_generation;
  j["fitness"] = r.fitness;
  j["gene"] = r.gene;
  j["joint_names"] = r.joint_names;
  j["online_dof"] = r.online_dof;
  j["goals"] = json::array();
  for (const auto& g : r.goals) {
    json jg;
    jg["label"] = g.label;
    jg["step"] = g.step;
    jg["state"] = state_json(g.state);
    jg["goodness"] = g.goodness;
    jg["targets"] = json::array();
    for (const auto& t : g.targets)
      jg["targets"].push_back(
          {{"arm", t.arm}, {"goodness", t.goodness}, {"center_error", t.center_error}, {"candidates", t.candidates}});
    j["goals"].push_back(jg);
  }
  j["fitness_history"] = r.fitness_history;
  return j;
}

inline SeedResult seed_result_from_json(const nlohmann::json& j) {
  SeedResult r;
  try {
    if (j.value("format", std::string()) != kSeedFormat) throw FormatError("not a seed file (format tag missing)");
    r.scenario = j.at("scenario").get<std::string>();
    r.generation = j.at("generation").get<std::size_t>();
    r.best_generation = j.value("best_generation", r.generation);
    r.fitness = j.at("fitness").get<double>();
    r.gene = j.at("gene").get<Gene>();
    r.joint_names = j.at("joint_names").get<std::vector<std::string>>();
    r.online_dof = j.at("online_dof").get<std::vector<std::string>>();
    for (const auto& jg : j.at("goals")) {
      GoalState g;
      g.label = jg.at("label").get<std::string>();
      g.step = jg.at("step").get<std::size_t>();
      const auto v = jg.at("state").get<std::vector<double>>();
      g.state = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      g.goodness = jg.at("goodness").get<double>();
      for (const auto& jt : jg.at("targets"))
        g.targets.push_back({jt.at("arm").get<std::string>(), jt.at("goodness").get<double>(),
                             jt.at("center_error").get<double>(), jt.at("candidates").get<std::size_t>()});
      r.goals.push_back(std::move(g));
    }
    r.fitness_history = j.value("fitness_history", std::vector<double>{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("seed file: ") + e.what());
  }
  return r;
}

inline std::string serialize_seed(const SeedResult& r) { return to_json(r).dump(2) + "\n"; }

inline SeedResult load_seed(const std::filesystem::path& path) {
  return seed_result_from_json(detail::parse_json_text(detail::read_file(path), path.string()));
}

/// Checks that a seed file fits a chain: same joint names in the same order.
inline void check_seed(const SeedResult& r, const KinematicChain& chain) {
  if (r.joint_names != chain.movable_names())
    throw ValidationError("seed joint names do not match the robot model");
  for (const auto& g : r.goals)
    if (static_cast<std::size_t>(g.state.size()) != chain.dof())
      throw ValidationError("seed state length does not match the robot model");
}

}  // namespace ikseed
