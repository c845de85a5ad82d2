#include "ikseed/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "ikseed");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = ikseed::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const fs::path kModel = fs::path(IKSEED_SOURCE_DIR) / "models" / "desk_arm.json";

std::string scenario_text(double target_x) {
  json sc = {
      {"name", "cli"},
      {"robot", kModel.string()},
      {"goals", json::array()},
      {"gene_vars",
       {{{"dof", "base_y"}, {"range", {-1.0, 1.0}}},
        {{"dof", "lifter"}, {"range", {0.0, 0.4}}, {"per_goal", true}},
        {{"dof", "waist_y"}, {"range", {-0.5, 0.5}}, {"per_goal", true}}}},
      {"online_dof", {"shoulder_p", "shoulder_r", "shoulder_y", "elbow", "wrist_y", "wrist_p", "wrist_y2"}},
      {"ga", {{"population", 16}, {"parents", 4}, {"max_generations", 8}, {"rng_seed", 3}}},
      {"query_radius", 0.06},
      {"evaluation", {{"position_range", 0.02}, {"orientation_range", 0.02}, {"trials", 6}}}};
  for (double dx : {0.0, 0.1}) {
    json goal = {{"label", dx == 0.0 ? "pre" : "grasp"}};
    goal["targets"] = {{{"arm", "arm"},
                        {"pose", {{"translation", {target_x + dx, 0.0, 0.75}},
                                  {"quaternion", {0.7071067811865476, 0.0, -0.7071067811865476, 0.0}}}}}};
    sc["goals"].push_back(goal);
  }
  return sc.dump(2);
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("ikseed_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
    const auto r = run({"build-map", "--model", kModel.string(), "--arm", "arm", "--interval-deg", "12", "--out",
                        (dir_ / "arm.rmap").string(), "--threads", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ofstream(dir_ / "scenario.json") << scenario_text(0.45);
    std::ofstream(dir_ / "far.json") << scenario_text(3.0);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static fs::path dir_;
  fs::path p(const std::string& name) const { return dir_ / name; }
  std::string map_arg() const { return "arm=" + p("arm.rmap").string(); }
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"build-map", "--arm", "arm"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"build-map", "--model", "/nonexistent.json", "--arm", "arm", "--out", p("x.rmap").string()}).code, 2);
  EXPECT_EQ(run({"build-map", "--model", kModel.string(), "--arm", "leg", "--out", p("x.rmap").string()}).code, 2);
}

TEST_F(Cli, BuildMapWritesManifest) {
  const auto manifest = json::parse(slurp(p("arm.rmap.manifest.json")));
  EXPECT_EQ(manifest["command"], "build-map");
  EXPECT_EQ(manifest["tool"], "ikseed");
  EXPECT_TRUE(manifest["inputs"].contains(kModel.string()));
  // rebuilding with another thread count gives the same bytes
  const auto r = run({"build-map", "--model", kModel.string(), "--arm", "arm", "--interval-deg", "12", "--out",
                      p("arm1.rmap").string(), "--threads", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(p("arm.rmap")), slurp(p("arm1.rmap")));
}

TEST_F(Cli, GenSeedSolveEvaluate) {
  const auto g = run({"gen-seed", "--config", p("scenario.json").string(), "--map", map_arg(), "--out",
                      p("seed.json").string(), "--snapshot", "0", "--snapshot", "best"});
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_NE(g.out.find("best_fitness"), std::string::npos);
  ASSERT_TRUE(fs::exists(p("seed.gen0.json")));
  ASSERT_TRUE(fs::exists(p("seed.history.csv")));
  ASSERT_TRUE(fs::exists(p("seed.manifest.json")));
  EXPECT_EQ(slurp(p("seed.history.csv")).rfind("generation,best_fitness\n0,", 0), 0u);

  // rerun reproduces the result byte for byte
  const auto g2 = run({"gen-seed", "--config", p("scenario.json").string(), "--map", map_arg(), "--out",
                       p("seed2.json").string()});
  ASSERT_EQ(g2.code, 0) << g2.err;
  EXPECT_EQ(slurp(p("seed.json")), slurp(p("seed2.json")));

  const auto seed = json::parse(slurp(p("seed.json")));
  EXPECT_EQ(seed["format"], "ikseed-seed/1");
  ASSERT_EQ(seed["goals"].size(), 2u);

  // solving the grasp goal's own target from its seed
  const auto s = run({"solve", "--model", kModel.string(), "--seed", p("seed.json").string(), "--goal", "grasp",
                      "--target", "arm=0.55,0,0.75,0.7071067811865476,0,-0.7071067811865476,0"});
  EXPECT_EQ(s.code, 0) << s.err << s.out;
  const auto sj = json::parse(s.out);
  EXPECT_EQ(sj["status"], "success");
  EXPECT_EQ(sj["solution"].size(), seed["joint_names"].size());

  const auto far = run({"solve", "--model", kModel.string(), "--seed", p("seed.json").string(), "--target",
                        "arm=3,0,0.75,1,0,0,0"});
  EXPECT_EQ(far.code, 1);
  EXPECT_EQ(run({"solve", "--model", kModel.string(), "--seed", p("seed.json").string(), "--target", "arm=1,2,3"}).code,
            2);
  EXPECT_EQ(run({"solve", "--model", kModel.string(), "--seed", p("seed.json").string(), "--target",
                 "arm=0.5,0,0.7,2,0,0,0"})
                .code,
            2);

  const auto e = run({"evaluate", "--config", p("scenario.json").string(), "--seed", p("seed.gen0.json").string(),
                      "--seed", "best=" + p("seed.json").string(), "--out-dir", p("eval").string()});
  ASSERT_EQ(e.code, 0) << e.err;
  for (const char* f : {"per_step.csv", "totals.csv", "report.json", "manifest.json"})
    EXPECT_TRUE(fs::exists(p("eval") / f)) << f;
  const auto report = json::parse(slurp(p("eval") / "report.json"));
  ASSERT_EQ(report["seed_sets"].size(), 2u);
  EXPECT_EQ(report["seed_sets"][0]["label"], "gen0");
  EXPECT_EQ(report["trials"], 6);
  for (const auto& set : report["seed_sets"]) {
    EXPECT_EQ(set["steps"][0]["attempts"], 6);
    EXPECT_EQ(set["steps"][1]["attempts"], set["steps"][0]["successes"]);
  }
  EXPECT_TRUE(report.contains("comparison"));

  // same labels twice is a usage error
  EXPECT_EQ(run({"evaluate", "--config", p("scenario.json").string(), "--seed", "a=" + p("seed.json").string(),
                 "--seed", "a=" + p("seed.json").string(), "--out-dir", p("eval2").string()})
                .code,
            2);
}

TEST_F(Cli, InfeasibleScenarioExitsOne) {
  const auto r = run({"gen-seed", "--config", p("far.json").string(), "--map", map_arg(), "--out",
                      p("far_seed.json").string()});
  EXPECT_EQ(r.code, 1) << r.err;
  EXPECT_NE(r.err.find("infeasible"), std::string::npos);
}

TEST_F(Cli, CorruptMapIsRejected) {
  const auto r = run({"gen-seed", "--config", p("scenario.json").string(), "--map",
                      "arm=" + p("scenario.json").string(), "--out", p("bad.json").string()});
  EXPECT_EQ(r.code, 2);
}
