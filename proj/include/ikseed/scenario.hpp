#pragma once

// Scenario file (JSON):
//
//   {
//     "name": "front_grasp",
//     "robot": "../models/seednoid_like.json",   // or {"model": path, "base_dof": [...]}
//     "map": {"right": "maps/right.rmap"},
//     "trajectory": [ {"targets": [ {"arm": "right", "pose": {...}} ]}, ... ],   // optional
//     "goals": [ {"label": "pre-grasp", "step": 0, "weight": 1.0,
//                 "targets": [ {"arm": "right", "pose": {"translation": [...], "quaternion": [...]}} ]} ],
//     "gene_vars": [ {"dof": "base_y", "range": [-1, 1], "per_goal": false} ],
//     "fixed_dof": {"waist_r": 0.0},
//     "online_dof": ["waist_y", "waist_p", "r_shoulder_p", ...],
//     "goodness": {"d_max": 0.25, "w": 1.0, "d_max_per_joint": {"base_y": 0.25}},
//     "ga": {"population": 50, "parents": 10, "max_generations": 300, "stagnation": 100, "rng_seed": 1},
//     "query_radius": 0.01,
//     "ik": {"position_tolerance": 1e-4, "orientation_tolerance": 1e-3, "max_iterations": 200},
//     "evaluation": {"position_range": 0.07, "orientation_range": 0.0873, "trials": 100}
//   }
//
// Relative paths resolve against the scenario file's directory. Without a
// trajectory, the goals themselves form the trajectory (goal i is step i).
// A goal without targets takes the targets of its trajectory step.

#include "ikseed/errors.hpp"
#include "ikseed/ga.hpp"
#include "ikseed/model_io.hpp"
#include "ikseed/pose.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ikseed {

struct TargetSpec {
  std::string arm;
  Pose pose;  // hand pose in the world (chain root) frame
};

struct Goal {
  std::string label;
  std::size_t step = 0;
  double weight = 1.0;
  std::vector<TargetSpec> targets;
};

struct GeneVar {
  std::string dof;
  double lo = 0.0;
  double hi = 0.0;
  bool per_goal = false;
};

struct ScenarioIK {
  double position_tolerance = 1e-4;
  double orientation_tolerance = 1e-3;
  int max_iterations = 200;
};

struct ScenarioEvaluation {
  double position_range = 0.07;
  double orientation_range = 5.0 * std::numbers::pi / 180.0;
  std::size_t trials = 100;
};

struct Scenario {
  std::string name;
  std::filesystem::path model_path;
  ModelOptions model_options;
  std::map<std::string, std::filesystem::path> maps;
  std::vector<std::vector<TargetSpec>> trajectory;
  std::vector<Goal> goals;
  std::vector<GeneVar> gene_vars;
  std::map<std::string, double> fixed_dof;
  std::vector<std::string> online_dof;
  double d_max = 0.25;
  double w = 1.0;
  std::map<std::string, double> d_max_per_joint;
  GAParams ga;
  double query_radius = 0.01;
  ScenarioIK ik;
  ScenarioEvaluation evaluation;

  /// Number of gene slots: one per shared variable, one per goal for per-goal variables.
  std::size_t gene_size() const {
    std::size_t n = 0;
    for (const auto& v : gene_vars) n += v.per_goal ? goals.size() : 1;
    return n;
  }
  std::vector<GeneRange> gene_ranges() const {
    std::vector<GeneRange> r;
    for (const auto& v : gene_vars)
      for (std::size_t k = 0; k < (v.per_goal ? goals.size() : 1); ++k) r.push_back({v.lo, v.hi});
    return r;
  }
  /// Steps whose seeds come from goals.
  std::vector<std::size_t> seeded_steps() const {
    std::vector<std::size_t> s;
    for (const auto& g : goals) s.push_back(g.step);
    return s;
  }
};

namespace detail {

inline std::vector<TargetSpec> read_targets(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) throw ParseError(what + ": targets must be an array");
  std::vector<TargetSpec> out;
  for (const auto& t : j) {
    TargetSpec ts;
    ts.arm = read_string(t, "arm", what);
    if (!t.contains("pose")) throw ParseError(what + ": target without pose");
    ts.pose = read_pose(t["pose"], what + ".pose");
    out.push_back(std::move(ts));
  }
  if (out.empty()) throw ValidationError(what + ": no targets");
  return out;
}

inline std::pair<double, double> read_range(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ParseError(what + ": expected [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace detail

inline Scenario parse_scenario(const std::string& text, const std::filesystem::path& base_dir = ".") {
  using nlohmann::json;
  const json doc = detail::parse_json_text(text, "scenario");
  if (!doc.is_object()) throw ParseError("scenario: top level must be an object");
  Scenario sc;
  sc.name = doc.value("name", std::string("scenario"));
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : (base_dir / path).lexically_normal();
  };
  try {
    if (!doc.contains("robot")) throw ParseError("scenario: missing robot");
    const auto& robot = doc["robot"];
    if (robot.is_string()) {
      sc.model_path = resolve(robot.get<std::string>());
    } else {
      sc.model_path = resolve(detail::read_string(robot, "model", "scenario.robot"));
      if (robot.contains("base_dof")) sc.model_options.base_dof = robot["base_dof"].get<std::vector<std::string>>();
    }
    if (doc.contains("map"))
      for (const auto& [arm, p] : doc["map"].items()) sc.maps[arm] = resolve(p.get<std::string>());

    if (doc.contains("trajectory")) {
      std::size_t k = 0;
      for (const auto& step : doc["trajectory"])
        sc.trajectory.push_back(detail::read_targets(step.at("targets"), "trajectory[" + std::to_string(k++) + "]"));
    }
    if (!doc.contains("goals") || !doc["goals"].is_array() || doc["goals"].empty())
      throw ValidationError("scenario: needs a non-empty goals array");
    std::size_t gi = 0;
    for (const auto& g : doc["goals"]) {
      Goal goal;
      goal.label = g.value("label", "goal" + std::to_string(gi));
      goal.step = g.value("step", gi);
      goal.weight = g.value("weight", 1.0);
      if (!(goal.weight > 0.0)) throw ValidationError("scenario: goal weights must be positive");
      if (g.contains("targets")) goal.targets = detail::read_targets(g["targets"], "goal '" + goal.label + "'");
      sc.goals.push_back(std::move(goal));
      ++gi;
    }
    if (sc.trajectory.empty()) {
      for (std::size_t k = 0; k < sc.goals.size(); ++k) {
        if (sc.goals[k].targets.empty()) throw ValidationError("scenario: goal without targets and no trajectory");
        if (sc.goals[k].step != k) throw ValidationError("scenario: without a trajectory, goal i must be step i");
        sc.trajectory.push_back(sc.goals[k].targets);
      }
    }
    for (auto& goal : sc.goals) {
      if (goal.step >= sc.trajectory.size())
        throw ValidationError("scenario: goal '" + goal.label + "' refers to a missing trajectory step");
      if (goal.targets.empty()) goal.targets = sc.trajectory[goal.step];
    }
    {
      std::vector<std::size_t> steps = sc.seeded_steps();
      std::sort(steps.begin(), steps.end());
      if (std::adjacent_find(steps.begin(), steps.end()) != steps.end())
        throw ValidationError("scenario: two goals seed the same step");
      if (steps.front() != 0) throw ValidationError("scenario: step 0 must be seeded by a goal");
    }

    if (doc.contains("gene_vars"))
      for (const auto& v : doc["gene_vars"]) {
        GeneVar gv;
        gv.dof = detail::read_string(v, "dof", "gene_vars");
        std::tie(gv.lo, gv.hi) = detail::read_range(v.at("range"), "gene_vars." + gv.dof);
        gv.per_goal = v.value("per_goal", false);
        if (!(gv.lo < gv.hi)) throw ValidationError("scenario: gene variable '" + gv.dof + "' needs lo < hi");
        sc.gene_vars.push_back(gv);
      }
    if (sc.gene_vars.empty()) throw ValidationError("scenario: needs at least one gene variable");
    if (doc.contains("fixed_dof"))
      for (const auto& [k, v] : doc["fixed_dof"].items()) sc.fixed_dof[k] = v.get<double>();
    if (!doc.contains("online_dof")) throw ValidationError("scenario: missing online_dof");
    sc.online_dof = doc["online_dof"].get<std::vector<std::string>>();
    if (sc.online_dof.empty()) throw ValidationError("scenario: online_dof must not be empty");

    if (doc.contains("goodness")) {
      const auto& g = doc["goodness"];
      sc.d_max = g.value("d_max", sc.d_max);
      sc.w = g.value("w", sc.w);
      if (g.contains("d_max_per_joint"))
        for (const auto& [k, v] : g["d_max_per_joint"].items()) sc.d_max_per_joint[k] = v.get<double>();
    }
    if (!(sc.d_max > 0.0) || !(sc.w > 0.0)) throw ValidationError("scenario: goodness d_max and w must be positive");
    if (doc.contains("ga")) {
      const auto& g = doc["ga"];
      sc.ga.population = g.value("population", sc.ga.population);
      sc.ga.parents = g.value("parents", sc.ga.parents);
      sc.ga.max_generations = g.value("max_generations", sc.ga.max_generations);
      sc.ga.stagnation = g.value("stagnation", sc.ga.stagnation);
      sc.ga.mutation_probability = g.value("mutation_probability", sc.ga.mutation_probability);
      sc.ga.mutation_sigma = g.value("mutation_sigma", sc.ga.mutation_sigma);
      sc.ga.rng_seed = g.value("rng_seed", sc.ga.rng_seed);
    }
    sc.ga.validate();
    sc.query_radius = doc.value("query_radius", sc.query_radius);
    if (!(sc.query_radius > 0.0)) throw ValidationError("scenario: query_radius must be positive");
    if (doc.contains("ik")) {
      const auto& k = doc["ik"];
      sc.ik.position_tolerance = k.value("position_tolerance", sc.ik.position_tolerance);
      sc.ik.orientation_tolerance = k.value("orientation_tolerance", sc.ik.orientation_tolerance);
      sc.ik.max_iterations = k.value("max_iterations", sc.ik.max_iterations);
    }
    if (doc.contains("evaluation")) {
      const auto& e = doc["evaluation"];
      sc.evaluation.position_range = e.value("position_range", sc.evaluation.position_range);
      sc.evaluation.orientation_range = e.value("orientation_range", sc.evaluation.orientation_range);
      sc.evaluation.trials = e.value("trials", sc.evaluation.trials);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
  return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return parse_scenario(detail::read_file(path), path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace ikseed
