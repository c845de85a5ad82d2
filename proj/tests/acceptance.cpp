// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when all pass.
//
//   ikseed_acceptance --cli path/to/ikseed --source REPO --work DIR [--only N]
//
// Criteria 1-8 run in-process. 9 and 10 drive the command-line tool end to end
// on the shipped desk-scale model and scenarios.

#include "ikseed/evaluation.hpp"
#include "ikseed/ga.hpp"
#include "ikseed/goodness.hpp"
#include "ikseed/ik_solver.hpp"
#include "ikseed/map_io.hpp"
#include "support.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <array>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace ikseed;
using namespace ikseed::testing;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- 1
Outcome jacobian_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  std::size_t bad = 0;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto dof = static_cast<std::size_t>(3 + i % 7);
    const auto chain = random_serial_chain(rng, dof);
    const JointState q = random_state(rng, chain);
    const auto link = chain.link("tip");
    const Matrix6X a = full_jacobian(chain, q, link);
    const Matrix6X n = numeric_jacobian(chain, q, link);
    bool ok = true;
    for (Eigen::Index r = 0; r < 6; ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        const double err = std::abs(a(r, c) - n(r, c));
        worst = std::max(worst, err);
        if (err > 1e-8 + 1e-5 * std::abs(n(r, c))) ok = false;
      }
    bad += !ok;
  }
  const double t = seconds_since(t0);
  return {bad == 0 && t < 10.0,
          "1000 chains (3-9 DOF), mismatches " + std::to_string(bad) + ", max abs err " + fmt("%.2e", worst) +
              ", " + fmt("%.2f", t) + " s"};
}

// ---- 2
Outcome goodness_reduction() {
  std::mt19937_64 rng(1002);
  double worst_abs = 0.0, worst_scale = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto inst = well_conditioned_instance(rng, static_cast<std::size_t>(6 + i % 3));
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(inst.jac.cols());
    const double f = manipulability(scaled_jacobian(inst.jac, ones, 1.0));
    const double y = yoshikawa(inst.jac);
    worst_abs = std::max(worst_abs, std::abs(f - y) / std::max(1.0, y));

    Eigen::VectorXd d(inst.jac.cols());
    for (auto& x : d) x = uniform(rng, 0.1, 0.9);
    const double c = uniform(rng, 0.1, 3.0);
    const double fd = manipulability(scaled_jacobian(inst.jac, d, 1.0));
    const double fc = manipulability(scaled_jacobian(inst.jac, c * d, 1.0));
    const double expect = std::pow(c, 6) * fd;
    worst_scale = std::max(worst_scale, std::abs(fc - expect) / expect);
  }
  return {worst_abs <= 1e-12 && worst_scale <= 1e-9,
          "1000 instances, max |f - yoshikawa| / max(1, y) " + fmt("%.2e", worst_abs) + ", max c^6 rel err " +
              fmt("%.2e", worst_scale)};
}

// ---- 3
Outcome limit_annihilation() {
  std::mt19937_64 rng(1003);
  int nonzero = 0;
  for (int i = 0; i < 100; ++i) {
    const auto chain = random_serial_chain(rng, 6);
    JointState q = random_state(rng, chain, 0.3);
    const auto k = static_cast<std::size_t>(rng() % 6);
    q[static_cast<Eigen::Index>(k)] = rng() % 2 ? chain.upper(k) : chain.lower(k);
    nonzero += goodness(chain, q, all_joints(chain), chain.link("tip"), GoodnessParams{}) != 0.0;
  }
  return {nonzero == 0, "100 instances, nonzero goodness " + std::to_string(nonzero)};
}

// ---- 4
Outcome wrist_round_trip() {
  constexpr double pi = std::numbers::pi;
  const std::array<JointLimits, 3> full = {{{-pi, pi}, {-pi, pi}, {-pi, pi}}};
  const std::array<JointLimits, 3> narrow = {{{-2.0, 1.6}, {-1.2, 1.6}, {-0.5, 3.0}}};
  auto fits = [&](double x, JointLimits l) {
    for (int k = -2; k <= 2; ++k)
      if (x + 2 * pi * k >= l.first && x + 2 * pi * k <= l.second) return true;
    return false;
  };
  std::mt19937_64 rng(1004);
  double worst = 0.0;
  int missing_branch = 0, filter_mismatch = 0;
  for (int i = 0; i < 10000; ++i) {
    const Mat3 r = random_rotation(rng);
    const auto sols = solve_zxz(r, full);
    missing_branch += sols.size() != 2;
    std::size_t feasible = 0;
    for (const auto& s : sols) {
      worst = std::max(worst, (zxz_rotation(s.angles[0], s.angles[1], s.angles[2]) - r).norm());
      feasible += fits(s.angles[0], narrow[0]) && s.angles[1] >= narrow[1].first &&
                  s.angles[1] <= narrow[1].second && fits(s.angles[2], narrow[2]);
    }
    const auto limited = solve_zxz(r, narrow);
    filter_mismatch += limited.size() != feasible;
    for (const auto& s : limited)
      worst = std::max(worst, (zxz_rotation(s.angles[0], s.angles[1], s.angles[2]) - r).norm());
  }
  return {worst <= 1e-9 && missing_branch == 0 && filter_mismatch == 0,
          "10^4 rotations, max Frobenius err " + fmt("%.2e", worst) + ", missing branches " +
              std::to_string(missing_branch) + ", limit-filter mismatches " + std::to_string(filter_mismatch)};
}

// ---- 5 and 6 share the toy map
constexpr double kToyInterval = 8.0 * std::numbers::pi / 180.0;

MapBuildOptions toy_options(unsigned threads) {
  MapBuildOptions o;
  o.intervals = {kToyInterval};
  o.threads = threads;
  return o;
}

Outcome reachability_oracle(const KinematicChain& chain, const ReachabilityMap& map) {
  std::mt19937_64 rng(1005);
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const double r = i % 2 ? uniform(rng, 0.0, 0.012) : uniform(rng, 0.012, 0.15);
    const Vec3 c(uniform(rng, -0.7, 0.7), uniform(rng, -0.7, 0.7), uniform(rng, -0.5, 0.8));
    const auto a = map.query(c, r);
    const auto b = brute_query(map, c, r);
    bool same = a.size() == b.size();
    for (std::size_t k = 0; same && k < a.size(); ++k) same = a[k].sample == b[k].sample;
    mismatches += !same;
  }
  const std::string bytes = serialize_map(map);
  std::istringstream in(bytes, std::ios::binary);
  const ReachabilityMap back = read_map(in);
  const bool round_trip = back == map && serialize_map(back) == bytes;
  const bool parallel = serialize_map(build_map(chain, "arm", toy_options(8))) == bytes;
  return {map.size() <= 100000 && mismatches == 0 && round_trip && parallel,
          std::to_string(map.size()) + " samples, query mismatches " + std::to_string(mismatches) + "/100" +
              ", round trip " + (round_trip ? "identical" : "DIFFERS") + ", 8-thread build " +
              (parallel ? "identical" : "DIFFERS")};
}

Outcome candidate_oracle(const KinematicChain& chain, const ReachabilityMap& map) {
  const ArmGuessProvider provider(chain, map, "arm");
  const auto& arm = chain.arm("arm");
  std::mt19937_64 rng(1006);
  int mismatches = 0;
  std::size_t total = 0;
  for (int i = 0; i < 100; ++i) {
    const JointState q = random_state(rng, chain);
    const Pose hand = relative_pose(chain, q, arm.arm_base, arm.hand);
    const double r = uniform(rng, 0.005, 0.05);
    std::vector<Eigen::VectorXd> got;
    for (const auto& c : provider.candidates(hand, r)) got.push_back(c.q_arm);
    total += got.size();
    mismatches += !same_state_sets(got, brute_candidates(chain, "arm", kToyInterval, hand, r));
  }
  return {mismatches == 0, "100 targets, " + std::to_string(total) + " candidates, set mismatches " +
                               std::to_string(mismatches)};
}

// ---- 7
Outcome ga_contract() {
  int located = 0, monotone = 0, replay = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GAParams p;
    p.rng_seed = seed;
    p.max_generations = 300;
    auto f = [](const Gene& g) { return -(g[0] - 0.3) * (g[0] - 0.3); };
    const auto a = evolve({{-1.0, 1.0}}, p, f);
    const auto b = evolve({{-1.0, 1.0}}, p, f);
    located += std::abs(a.best_gene[0] - 0.3) <= 0.01 && a.generations() <= 301;
    monotone += std::is_sorted(a.fitness_history.begin(), a.fitness_history.end());
    replay += a.fitness_history == b.fitness_history && a.best_gene == b.best_gene;
  }
  return {located == 10 && monotone == 10 && replay == 10,
          "optimum within 0.01: " + std::to_string(located) + "/10, monotone: " + std::to_string(monotone) +
              "/10, replay identical: " + std::to_string(replay) + "/10"};
}

// ---- 8
Outcome planar_ik_oracle() {
  const auto chain = planar_2r();
  const auto tip = chain.link("tip");
  std::mt19937_64 rng(1008);
  auto request = [&](const Vec3& target, const JointState& seed) {
    IKRequest req;
    req.active = all_joints(chain);
    req.seed = chain.clamp(seed);
    req.targets = {{tip, Pose::from_translation(target), true}};
    req.tolerances = {1e-6, 1e-6};
    return req;
  };
  int ok = 0;
  for (int i = 0; i < 500; ++i) {
    const double rad = uniform(rng, 0.25, 1.75);
    const double phi = uniform(rng, -std::numbers::pi, std::numbers::pi);
    const Vec3 target(rad * std::cos(phi), rad * std::sin(phi), 0.0);
    const auto sol = planar_2r_ik(target.x(), target.y())[static_cast<std::size_t>(i % 2)];
    JointState seed(2);
    seed << sol[0] + uniform(rng, -0.2, 0.2), sol[1] + uniform(rng, -0.2, 0.2);
    const auto out = solve(chain, request(target, seed));
    ok += out.success() && (forward_kinematics(chain, out.solution, tip).translation - target).norm() <= 1e-6;
  }
  int false_success = 0;
  for (int i = 0; i < 200; ++i) {
    const double phi = uniform(rng, -std::numbers::pi, std::numbers::pi);
    const double rad = i % 2 ? uniform(rng, 1.81, 3.0) : uniform(rng, 0.0, 0.19);
    false_success += solve(chain, request(Vec3(rad * std::cos(phi), rad * std::sin(phi), 0.0),
                                          random_state(rng, chain)))
                         .success();
  }
  return {ok >= 495 && false_success == 0, "reachable solved " + std::to_string(ok) +
                                                "/500 (need 495), unreachable reported solved " +
                                                std::to_string(false_success) + "/200"};
}

// ---- 9 and 10: command-line runs

struct Shell {
  fs::path cli;
  fs::path source;
  fs::path work;
  std::string log;

  /// Runs the tool, appending its output to the log; returns exit status and stdout.
  std::pair<int, std::string> run(const std::string& args) {
    const std::string cmd = "\"" + cli.string() + "\" " + args + " 2>&1";
    log += "$ ikseed " + args + "\n";
    std::string out;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return {-1, ""};
    std::array<char, 4096> buf;
    while (std::fgets(buf.data(), buf.size(), p)) out += buf.data();
    const int status = pclose(p);
    log += out;
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
  }
  std::string q(const fs::path& p) const { return "\"" + p.string() + "\""; }
};

std::map<std::string, std::string> snapshot_paths(const std::string& gen_out) {
  // lines: snapshot <generation> <fitness> <path>
  std::map<std::string, std::string> out;
  std::istringstream in(gen_out);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag, gen, fit, path;
    if (ls >> tag >> gen >> fit >> path && tag == "snapshot") out[gen] = path;
  }
  return out;
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  return json::parse(f);
}

bool gated(const json& set, std::size_t trials) {
  const auto& steps = set["steps"];
  if (steps.empty() || steps[0]["attempts"].get<std::size_t>() != trials) return false;
  for (std::size_t k = 1; k < steps.size(); ++k)
    if (steps[k]["attempts"] != steps[k - 1]["successes"]) return false;
  return true;
}

bool ensure_map(Shell& sh, fs::path& map) {
  map = sh.work / "desk_arm_8deg.rmap";
  if (fs::exists(map)) return true;
  return sh.run("build-map --model " + sh.q(sh.source / "models/desk_arm.json") + " --arm arm --interval-deg 8 --out " +
                sh.q(map))
             .first == 0;
}

Outcome trend_reproduction(Shell& sh) {
  const auto t0 = Clock::now();
  fs::path map;
  if (!ensure_map(sh, map)) return {false, "build-map failed"};
  const fs::path seed = sh.work / "front_grasp.json";
  const auto [gcode, gout] = sh.run("gen-seed --config " + sh.q(sh.source / "scenarios/desk_front_grasp.json") +
                                    " --map arm=" + sh.q(map) + " --out " + sh.q(seed) +
                                    " --snapshot 0 --snapshot 10 --snapshot best");
  if (gcode != 0) return {false, "gen-seed exited " + std::to_string(gcode)};
  const auto snaps = snapshot_paths(gout);
  if (snaps.size() != 3) return {false, "expected three distinct snapshots, got " + std::to_string(snaps.size())};
  const std::string early = snaps.at("0"), mid = snaps.at("10");
  std::string best;
  for (const auto& [g, p] : snaps)
    if (g != "0" && g != "10") best = p;

  const fs::path out_dir = sh.work / "front_grasp_eval";
  const auto [ecode, eout] =
      sh.run("evaluate --config " + sh.q(sh.source / "scenarios/desk_front_grasp.json") + " --seed early=" +
             sh.q(early) + " --seed mid=" + sh.q(mid) + " --seed best=" + sh.q(best) +
             " --trials 100 --position-range 0.07 --orientation-range-deg 5 --rng-seed 1 --out-dir " + sh.q(out_dir));
  if (ecode != 0) return {false, "evaluate exited " + std::to_string(ecode)};
  const json report = read_json(out_dir / "report.json");
  std::vector<double> fit, ratio;
  std::string summary;
  for (const auto& s : report["seed_sets"]) {
    fit.push_back(s["fitness"].get<double>());
    ratio.push_back(s["total"]["ratio"].get<double>());
    summary += s["label"].get<std::string>() + " " + fmt("%.4g", fit.back()) + "->" + fmt("%.4f", ratio.back()) + " ";
  }
  const auto rho = spearman(fit, ratio);
  const double elapsed = seconds_since(t0);
  const bool a = ratio.size() == 3 && ratio[2] >= ratio[0];
  const bool b = rho && *rho > 0.0;
  const bool c = elapsed < 1800.0;
  return {a && b && c, summary + "| best>=early " + (a ? "yes" : "no") + ", spearman " +
                           (rho ? fmt("%.3f", *rho) : std::string("undefined")) + ", " + fmt("%.1f", elapsed) + " s"};
}

Outcome trajectory_gating(Shell& sh) {
  fs::path map;
  if (!ensure_map(sh, map)) return {false, "build-map failed"};
  const fs::path scenario = sh.source / "scenarios/desk_pouring.json";
  const fs::path seed = sh.work / "pouring.json";
  const auto [gcode, gout] = sh.run("gen-seed --config " + sh.q(scenario) + " --map arm=" + sh.q(map) + " --out " +
                                    sh.q(seed) + " --snapshot 0");
  if (gcode != 0) return {false, "gen-seed exited " + std::to_string(gcode)};
  const auto snaps = snapshot_paths(gout);
  if (!snaps.count("0")) return {false, "missing generation-0 snapshot"};

  std::vector<std::size_t> seeded;
  const json seed_file = read_json(seed);
  for (const auto& g : seed_file["goals"]) seeded.push_back(g["step"].get<std::size_t>());

  const fs::path perturbed = sh.work / "pouring_eval";
  const auto [e1, o1] = sh.run("evaluate --config " + sh.q(scenario) + " --seed early=" + sh.q(snaps.at("0")) +
                               " --seed best=" + sh.q(seed) + " --trials 100 --out-dir " + sh.q(perturbed));
  const fs::path control = sh.work / "pouring_control";
  const auto [e2, o2] = sh.run("evaluate --config " + sh.q(scenario) + " --seed best=" + sh.q(seed) +
                               " --trials 100 --position-range 0 --orientation-range-deg 0 --out-dir " + sh.q(control));
  if (e1 != 0 || e2 != 0) return {false, "evaluate failed"};

  const json rp = read_json(perturbed / "report.json");
  const json rc = read_json(control / "report.json");
  bool gating = true;
  std::size_t steps = 0;
  for (const auto& s : rp["seed_sets"]) {
    gating = gating && gated(s, 100);
    steps = s["steps"].size();
  }
  bool all_solved = gated(rc["seed_sets"][0], 100);
  for (const auto& s : rc["seed_sets"][0]["steps"]) all_solved = all_solved && s["successes"] == 100;
  const bool seeds_ok = seeded == std::vector<std::size_t>{0, 4, 8, 12};
  const auto& best = rp["seed_sets"][1];
  return {gating && all_solved && seeds_ok && steps == 13,
          std::to_string(steps) + " via-points, seeds at {0,4,8,12} " + (seeds_ok ? "yes" : "no") +
              ", denominators gated " + (gating ? "yes" : "no") + ", perturbed best total " +
              fmt("%.4f", best["total"]["ratio"].get<double>()) + ", zero-perturbation control " +
              (all_solved ? "100% every step" : "NOT 100%")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("ikseed acceptance run");
  Shell sh;
  std::vector<int> only;
  app.add_option("--cli", sh.cli, "ikseed executable")->required();
  app.add_option("--source", sh.source, "repository root")->required();
  app.add_option("--work", sh.work, "scratch directory")->required();
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(sh.work);

  const KinematicChain toy = toy_arm();
  std::optional<ReachabilityMap> toy_map;
  auto with_toy_map = [&](auto fn) {
    if (!toy_map) toy_map = build_map(toy, "arm", toy_options(1));
    return fn(toy, *toy_map);
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"jacobian oracle", jacobian_oracle},
      {"goodness reduction", goodness_reduction},
      {"limit annihilation", limit_annihilation},
      {"wrist round-trip", wrist_round_trip},
      {"reachability oracle", [&] { return with_toy_map(reachability_oracle); }},
      {"candidate oracle", [&] { return with_toy_map(candidate_oracle); }},
      {"GA contract", ga_contract},
      {"2R IK oracle", planar_ik_oracle},
      {"trend reproduction", [&] { return trend_reproduction(sh); }},
      {"trajectory gating", [&] { return trajectory_gating(sh); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << n << ". " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  std::ofstream(sh.work / "cli.log") << sh.log;
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criteria failed" : std::string("acceptance: all passed"))
            << std::endl;
  return failed ? 1 : 0;
}
