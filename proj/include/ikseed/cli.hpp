#pragma once

// Command-line front end. Kept in a header so tests can drive it in-process.
//
//   ikseed build-map --model M --arm A [--interval-deg D...] [--cell-size S] [--stride T] --out F
//   ikseed gen-seed  --config SCENARIO --out F [--snapshot G|best ...] [--map arm=path] [--rng-seed N]
//   ikseed solve     --model M --seed F [--goal L] (--target arm=x,y,z,qw,qx,qy,qz ... | --frame L --pose ...)
//   ikseed evaluate  --config SCENARIO --seed [label=]F ... [--trials N] --out-dir D
//
// Exit codes: 0 success, 1 domain failure (infeasible scenario, IK failure), 2 usage or config error.

#include "ikseed/errors.hpp"
#include "ikseed/evaluation.hpp"
#include "ikseed/ik_solver.hpp"
#include "ikseed/map_io.hpp"
#include "ikseed/model_io.hpp"
#include "ikseed/parallel.hpp"
#include "ikseed/reachability_map.hpp"
#include "ikseed/scenario.hpp"
#include "ikseed/seed_generator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ikseed {

inline constexpr const char* kVersion = "0.1.0";

namespace cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string file_hash(const fs::path& p) {
  const std::string bytes = detail::read_file(p);
  std::uint64_t h = detail::kFnvOffset;
  detail::fnv1a(h, bytes.data(), bytes.size());
  return hex64(h);
}

inline void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw FormatError("cannot write " + p.string());
  f << text;
  if (!f) throw FormatError("failed writing " + p.string());
}

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config = json::object();
  std::vector<fs::path> inputs;
  json seeds = json::object();

  void write(const fs::path& path) const {
    json j;
    j["tool"] = "ikseed";
    j["version"] = kVersion;
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config;
    j["inputs"] = json::object();
    for (const auto& p : inputs) j["inputs"][p.string()] = file_hash(p);
    j["rng_seeds"] = seeds;
    j["timestamp"] = utc_timestamp();
    write_text(path, j.dump(2) + "\n");
  }
};

/// "x,y,z,qw,qx,qy,qz" -> Pose
inline Pose parse_pose_arg(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw ParseError("");
    } catch (const std::exception&) {
      throw ParseError("bad pose '" + text + "': expected x,y,z,qw,qx,qy,qz");
    }
  }
  if (v.size() != 7) throw ParseError("bad pose '" + text + "': expected 7 numbers x,y,z,qw,qx,qy,qz");
  const Quat q(v[3], v[4], v[5], v[6]);
  if (std::abs(q.norm() - 1.0) > 1e-3) throw ParseError("bad pose '" + text + "': quaternion is not unit length");
  return Pose::from_quat(q, Vec3(v[0], v[1], v[2]));
}

inline std::pair<std::string, std::string> split_assignment(const std::string& s, const char* what) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw ParseError(std::string(what) + ": expected name=value, got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

inline ModelOptions model_options(const std::vector<std::string>& base_dof) {
  ModelOptions o;
  if (!base_dof.empty()) o.base_dof = base_dof;
  return o;
}

// ---- commands

struct BuildMapArgs {
  std::string model, arm, out;
  std::vector<std::string> base_dof;
  std::vector<double> interval_deg{2.0};
  double cell_size = 0.05, stride = 0.025;
  std::uint32_t prune = 0;
  int threads = 0;
};

inline int build_map_cmd(const BuildMapArgs& a, Manifest m, std::ostream& out) {
  const KinematicChain chain = load_chain_file(a.model, model_options(a.base_dof));
  MapBuildOptions o;
  o.intervals.clear();
  for (double d : a.interval_deg) o.intervals.push_back(deg2rad(d));
  o.grid = {a.cell_size, a.stride};
  o.threads = resolve_threads(a.threads);
  o.prune_per_cell = a.prune;
  const ReachabilityMap map = build_map(chain, a.arm, o);
  save_map(map, a.out);
  out << "samples " << map.size() << "\ncells " << map.cell_count() << "\n";
  m.config = {{"model", a.model},       {"arm", a.arm},         {"base_dof", a.base_dof},
              {"interval_deg", a.interval_deg}, {"cell_size", a.cell_size}, {"stride", a.stride},
              {"prune", a.prune},       {"out", a.out}};
  m.inputs = {a.model};
  m.write(a.out + ".manifest.json");
  return 0;
}

struct GenSeedArgs {
  std::string config, out, history;
  std::vector<std::string> snapshots, maps;
  std::optional<std::uint64_t> rng_seed;
  int threads = 0;
};

inline fs::path sibling(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  const std::string stem = p.extension() == ".json" ? p.stem().string() : p.filename().string();
  return p.parent_path() / (stem + suffix);
}

inline int gen_seed_cmd(const GenSeedArgs& a, Manifest m, std::ostream& out) {
  std::map<std::string, fs::path> overrides;
  for (const auto& s : a.maps) {
    auto [arm, path] = split_assignment(s, "--map");
    overrides[arm] = path;
  }
  LoadedScenario in = load_scenario_inputs(a.config, overrides);
  if (a.rng_seed) in.scenario.ga.rng_seed = *a.rng_seed;
  SeedProblem problem(in.scenario, in.chain, std::move(in.maps));
  const Evolution evo = evolve(problem, resolve_threads(a.threads));

  write_text(a.out, serialize_seed(evo.best));
  const fs::path history = a.history.empty() ? sibling(a.out, ".history.csv") : fs::path(a.history);
  write_text(history, fitness_history_csv(evo.ga.fitness_history));
  out << "generations " << evo.ga.generations() << "\nbest_generation " << evo.ga.best_generation
      << "\nbest_fitness " << fmt_double(evo.best.fitness) << "\nresult " << a.out << "\nhistory "
      << history.string() << "\n";
  for (const auto& s : a.snapshots) {
    std::size_t g;
    if (s == "best") {
      g = evo.ga.best_generation;
    } else {
      try {
        std::size_t used = 0;
        g = std::stoul(s, &used);
        if (used != s.size()) throw ParseError("");
      } catch (const std::exception&) {
        throw ParseError("--snapshot expects a generation number or 'best', got '" + s + "'");
      }
    }
    const SeedResult snap = seed_result_at(problem, evo.ga, g);
    const fs::path p = sibling(a.out, ".gen" + std::to_string(snap.generation) + ".json");
    write_text(p, serialize_seed(snap));
    out << "snapshot " << snap.generation << ' ' << fmt_double(snap.fitness) << ' ' << p.string() << "\n";
  }

  m.config = {{"config", a.config}, {"out", a.out}, {"history", history.string()}, {"snapshots", a.snapshots}};
  m.config["maps"] = json::object();
  for (const auto& [arm, p] : in.scenario.maps) m.config["maps"][arm] = p.string();
  m.inputs = {a.config, in.scenario.model_path};
  for (const auto& [arm, p] : in.scenario.maps) m.inputs.push_back(p);
  m.seeds = {{"ga", in.scenario.ga.rng_seed}};
  m.write(sibling(a.out, ".manifest.json"));
  return 0;
}

struct SolveArgs {
  std::string model, seed, goal, frame, pose, manifest;
  std::vector<std::string> base_dof, targets, active;
  double position_tol = 1e-4, orientation_tol = 1e-3, w = 1.0;
  int max_iterations = 200;
};

inline int solve_cmd(const SolveArgs& a, Manifest m, std::ostream& out) {
  const KinematicChain chain = load_chain_file(a.model, model_options(a.base_dof));
  const SeedResult seed = load_seed(a.seed);
  check_seed(seed, chain);
  if (seed.goals.empty()) throw ValidationError("seed file has no goals");

  const GoalState* goal = &seed.goals.front();
  if (!a.goal.empty()) {
    goal = nullptr;
    for (const auto& g : seed.goals)
      if (g.label == a.goal || std::to_string(g.step) == a.goal) goal = &g;
    if (!goal) throw ValidationError("seed file has no goal '" + a.goal + "'");
  }

  IKRequest req;
  req.seed = goal->state;
  req.active = chain.movable_indices(a.active.empty() ? seed.online_dof : a.active);
  for (const auto& t : a.targets) {
    auto [arm, pose] = split_assignment(t, "--target");
    req.targets.push_back({chain.arm(arm).hand, parse_pose_arg(pose), false});
  }
  if (!a.frame.empty() || !a.pose.empty()) {
    if (a.frame.empty() || a.pose.empty()) throw ParseError("--frame and --pose go together");
    req.targets.push_back({chain.link(a.frame), parse_pose_arg(a.pose), false});
  }
  if (req.targets.empty()) throw ParseError("solve needs --target or --frame/--pose");
  req.tolerances = {a.position_tol, a.orientation_tol};
  req.max_iterations = a.max_iterations;
  req.w = a.w;

  const IKOutcome o = solve(chain, req);
  json j;
  j["status"] = to_string(o.status);
  j["iterations"] = o.iterations;
  j["position_residual"] = o.position_residual;
  j["orientation_residual"] = o.orientation_residual;
  j["joint_names"] = chain.movable_names();
  j["solution"] = state_json(o.solution);
  out << j.dump(2) << "\n";

  if (!a.manifest.empty()) {
    m.config = {{"model", a.model}, {"seed", a.seed}, {"goal", goal->label}, {"targets", a.targets},
                {"frame", a.frame}, {"pose", a.pose}, {"position_tol", a.position_tol},
                {"orientation_tol", a.orientation_tol}, {"max_iterations", a.max_iterations}};
    m.inputs = {a.model, a.seed};
    m.write(a.manifest);
  }
  return o.success() ? 0 : 1;
}

struct EvaluateArgs {
  std::string config, out_dir;
  std::vector<std::string> seeds;
  std::optional<std::size_t> trials;
  std::optional<double> position_range, orientation_range_deg;
  std::uint64_t rng_seed = 1;
  int threads = 0;
};

inline int evaluate_cmd(const EvaluateArgs& a, Manifest m, std::ostream& out) {
  const Scenario sc = load_scenario(a.config);
  const KinematicChain chain = load_chain_file(sc.model_path, sc.model_options);
  if (a.seeds.empty()) throw ParseError("evaluate needs at least one --seed");

  std::vector<SeedSet> sets;
  std::vector<fs::path> seed_paths;
  for (const auto& s : a.seeds) {
    std::string label, path = s;
    if (auto eq = s.find('='); eq != std::string::npos) {
      label = s.substr(0, eq);
      path = s.substr(eq + 1);
    }
    const SeedResult r = load_seed(path);
    check_seed(r, chain);
    SeedSet set;
    set.label = label.empty() ? "gen" + std::to_string(r.generation) : label;
    for (const auto& other : sets)
      if (other.label == set.label) throw ValidationError("duplicate seed label '" + set.label + "'");
    set.generation = r.generation;
    set.fitness = r.fitness;
    set.seeds = r.seeds();
    sets.push_back(std::move(set));
    seed_paths.emplace_back(path);
  }

  PerturbationSpec spec;
  spec.position_range = a.position_range.value_or(sc.evaluation.position_range);
  spec.orientation_range =
      a.orientation_range_deg ? deg2rad(*a.orientation_range_deg) : sc.evaluation.orientation_range;
  const std::size_t trials = a.trials.value_or(sc.evaluation.trials);

  const EvalProblem problem = eval_problem(sc, chain);
  const auto reports = evaluate(problem, sets, spec, trials, a.rng_seed, resolve_threads(a.threads));
  std::optional<TrendSummary> trend;
  if (reports.size() >= 2) trend = fitness_vs_success(reports);

  const fs::path dir(a.out_dir);
  write_text(dir / "per_step.csv", per_step_csv(reports));
  write_text(dir / "totals.csv", totals_csv(reports));
  json report = report_json(reports, trend);
  report["scenario"] = sc.name;
  report["trials"] = trials;
  report["rng_seed"] = a.rng_seed;
  report["perturbation"] = {{"position_range", spec.position_range}, {"orientation_range", spec.orientation_range}};
  write_text(dir / "report.json", report.dump(2) + "\n");

  for (const auto& r : reports) {
    const StepCount t = r.total();
    out << r.label << " fitness " << fmt_double(r.fitness) << " trajectory " << r.trajectory_successes << '/'
        << r.trials << " ik " << t.successes << '/' << t.attempts << "\n";
  }
  if (trend) out << "spearman " << (trend->spearman ? fmt_double(*trend->spearman) : std::string("undefined")) << "\n";

  m.config = {{"config", a.config}, {"seeds", a.seeds}, {"trials", trials}, {"out_dir", a.out_dir},
              {"position_range", spec.position_range}, {"orientation_range", spec.orientation_range}};
  m.inputs = {a.config, sc.model_path};
  m.inputs.insert(m.inputs.end(), seed_paths.begin(), seed_paths.end());
  m.seeds = {{"evaluation", a.rng_seed}};
  m.write(dir / "manifest.json");
  return 0;
}

}  // namespace cli

/// Runs the command line; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli;
  CLI::App app{"IK seed generation and evaluation for dual-arm mobile robots", "ikseed"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  BuildMapArgs bm;
  auto* build = app.add_subcommand("build-map", "Build a reachability map for one arm");
  build->add_option("--model", bm.model, "Robot model file")->required();
  build->add_option("--arm", bm.arm, "Arm name")->required();
  build->add_option("--base-dof", bm.base_dof, "Override the model's base DOF list");
  build->add_option("--interval-deg", bm.interval_deg, "Sampling step per joint (one value or one per joint)");
  build->add_option("--cell-size", bm.cell_size, "Voxel edge length [m]");
  build->add_option("--stride", bm.stride, "Voxel stride [m]");
  build->add_option("--prune", bm.prune, "Keep at most N samples per cell (0 keeps all)");
  build->add_option("--out", bm.out, "Output map file")->required();
  build->add_option("--threads", bm.threads, "Worker threads (default: IKSEED_THREADS or all cores)");

  GenSeedArgs gs;
  std::uint64_t gs_seed = 0;
  auto* gen = app.add_subcommand("gen-seed", "Run the seed generator on a scenario");
  gen->add_option("--config", gs.config, "Scenario file")->required();
  gen->add_option("--out", gs.out, "Result file (JSON)")->required();
  gen->add_option("--history", gs.history, "Fitness history CSV (default: <out>.history.csv)");
  gen->add_option("--snapshot", gs.snapshots, "Also write the best seed of generation G (or 'best')");
  gen->add_option("--map", gs.maps, "Override a map path: arm=path");
  auto* gs_seed_opt = gen->add_option("--rng-seed", gs_seed, "Override the scenario's GA seed");
  gen->add_option("--threads", gs.threads, "Worker threads");

  SolveArgs sv;
  auto* solve_app = app.add_subcommand("solve", "Solve IK from a seed file");
  solve_app->add_option("--model", sv.model, "Robot model file")->required();
  solve_app->add_option("--base-dof", sv.base_dof, "Override the model's base DOF list");
  solve_app->add_option("--seed", sv.seed, "Seed file")->required();
  solve_app->add_option("--goal", sv.goal, "Goal label or step (default: first goal)");
  solve_app->add_option("--target", sv.targets, "arm=x,y,z,qw,qx,qy,qz");
  solve_app->add_option("--frame", sv.frame, "Target link name");
  solve_app->add_option("--pose", sv.pose, "x,y,z,qw,qx,qy,qz for --frame");
  solve_app->add_option("--active", sv.active, "Joints to solve for (default: the seed's online DOF)");
  solve_app->add_option("--position-tol", sv.position_tol);
  solve_app->add_option("--orientation-tol", sv.orientation_tol);
  solve_app->add_option("--max-iterations", sv.max_iterations);
  solve_app->add_option("--w", sv.w, "Position/orientation ratio [m/rad]");
  solve_app->add_option("--manifest", sv.manifest, "Write a run manifest here");

  EvaluateArgs ev;
  std::size_t ev_trials = 0;
  double ev_pos = 0, ev_ori = 0;
  auto* eval_app = app.add_subcommand("evaluate", "Compare seed files under perturbed IK targets");
  eval_app->add_option("--config", ev.config, "Scenario file")->required();
  eval_app->add_option("--seed", ev.seeds, "Seed file, optionally label=path")->required();
  auto* trials_opt = eval_app->add_option("--trials", ev_trials, "Trials (default from scenario, else 100)");
  auto* pos_opt = eval_app->add_option("--position-range", ev_pos, "+- m per axis");
  auto* ori_opt = eval_app->add_option("--orientation-range-deg", ev_ori, "+- deg per RPY axis");
  eval_app->add_option("--rng-seed", ev.rng_seed, "Perturbation stream seed");
  eval_app->add_option("--out-dir", ev.out_dir, "Report directory")->required();
  eval_app->add_option("--threads", ev.threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  Manifest m;
  for (int i = 0; i < argc; ++i) m.argv.emplace_back(argv[i]);
  try {
    if (*build) {
      m.command = "build-map";
      return build_map_cmd(bm, m, out);
    }
    if (*gen) {
      m.command = "gen-seed";
      if (*gs_seed_opt) gs.rng_seed = gs_seed;
      return gen_seed_cmd(gs, m, out);
    }
    if (*solve_app) {
      m.command = "solve";
      return solve_cmd(sv, m, out);
    }
    if (*eval_app) {
      m.command = "evaluate";
      if (*trials_opt) ev.trials = ev_trials;
      if (*pos_opt) ev.position_range = ev_pos;
      if (*ori_opt) ev.orientation_range_deg = ev_ori;
      return evaluate_cmd(ev, m, out);
    }
  } catch (const InfeasibleError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace ikseed
