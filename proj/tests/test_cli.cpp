#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <gtest/gtest.h>

#include "kinplan/bench.hpp"
#include "kinplan/config.hpp"
#include "kinplan/training.hpp"

namespace kinplan {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kinplan_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

struct CliResult {
  int code;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "kinplan");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// A few iterations are enough for commands that only need a valid network.
const fs::path& tiny_params() {
  static const fs::path params = [] {
    const fs::path dir = temp_dir("tiny_train");
    const CliResult r = cli({"train", "-o", dir.string(), "--set", "train.iterations=3", "--set",
                       "train.batch_size=2"});
    EXPECT_EQ(r.code, 0) << r.err;
    return dir / "params.bin";
  }();
  return params;
}

// Polyline point lists by class, in pixels.
std::map<std::string, std::vector<std::pair<double, double>>> polylines(const std::string& svg) {
  std::map<std::string, std::vector<std::pair<double, double>>> out;
  const std::regex line(R"re(<polyline class="([a-z]+)"[^>]*points="([^"]*)")re");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), line); it != std::sregex_iterator();
       ++it) {
    std::istringstream pts((*it)[2].str());
    std::string tok;
    while (pts >> tok) {
      const auto comma = tok.find(',');
      out[(*it)[1].str()].emplace_back(std::stod(tok.substr(0, comma)),
                                       std::stod(tok.substr(comma + 1)));
    }
  }
  return out;
}

TEST(Cli, GenIsDeterministicPerSeed) {
  const fs::path a = temp_dir("gen_a"), b = temp_dir("gen_b"), c = temp_dir("gen_c");
  const std::vector<std::string> sizes = {"--set", "bench.tracking_scenarios=8", "--set",
                                          "bench.navigation_episodes=4"};
  auto gen = [&](const fs::path& dir, const std::string& seed) {
    std::vector<std::string> args = {"gen", "--seed", seed, "-o", dir.string()};
    args.insert(args.end(), sizes.begin(), sizes.end());
    const CliResult r = cli(args);
    ASSERT_EQ(r.code, 0) << r.err;
  };
  gen(a, "7");
  gen(b, "7");
  gen(c, "8");
  EXPECT_EQ(slurp(a / "tracking" / "manifest.csv"), slurp(b / "tracking" / "manifest.csv"));
  EXPECT_EQ(slurp(a / "suites.txt"), slurp(b / "suites.txt"));
  EXPECT_NE(slurp(a / "suites.txt"), slurp(c / "suites.txt"));
  EXPECT_EQ(load_suite((a / "navigation" / "manifest.csv").string()).scenarios.size(), 4u);
}

TEST(Cli, ConfigErrorsExitWithOne) {
  const fs::path dir = temp_dir("errors");
  EXPECT_EQ(cli({"gen", "-o", dir.string(), "--set", "no.such.key=1"}).code, 1);
  EXPECT_EQ(cli({"gen", "-o", dir.string(), "--set", "train.iterations=abc"}).code, 1);
  EXPECT_EQ(cli({"gen", "-o", dir.string(), "--set", "bench.radii=2,1"}).code, 1);
  EXPECT_EQ(cli({"gen", "-o", dir.string(), "--set", "missing_equals"}).code, 1);
  EXPECT_EQ(cli({"gen"}).code, 1);  // --out is required
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
  EXPECT_EQ(cli({"gen", "-o", dir.string(), "--config", (dir / "nope.toml").string()}).code, 1);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, MissingInputsExitWithTwo) {
  const fs::path dir = temp_dir("missing");
  const CliResult eval = cli({"eval", "-o", dir.string(), "-p", (dir / "none.bin").string()});
  EXPECT_EQ(eval.code, 2);
  EXPECT_NE(eval.err.find("none.bin"), std::string::npos);
  EXPECT_EQ(cli({"bench", "-o", dir.string(), "-P", "a=" + (dir / "none.bin").string(),
                 "--smoke"})
                .code,
            2);
  EXPECT_EQ(cli({"replay", "-o", dir.string(), "--run", (dir / "absent").string()}).code, 2);
}

TEST(Cli, ConfigEchoParsesBackToTheSameSettings) {
  const fs::path dir = temp_dir("echo");
  {
    std::ofstream cfg(dir / "in.toml");
    cfg << "seed = 5\n[train]\niterations = 17\n[mpc]\nmodel = \"bicycle\"\n";
  }
  const fs::path out = dir / "out";
  ASSERT_EQ(cli({"gen", "-c", (dir / "in.toml").string(), "--set", "control.r_min=2.5", "-o",
                 out.string(), "--set", "bench.tracking_scenarios=4", "--set",
                 "bench.navigation_episodes=4"})
                .code,
            0);
  const ConfigFile echo = ConfigFile::load((out / "config.toml").string());
  EXPECT_EQ(echo.entries().at("seed"), "5");
  EXPECT_EQ(echo.entries().at("train.iterations"), "17");
  EXPECT_EQ(echo.entries().at("mpc.model"), "bicycle");
  EXPECT_EQ(std::stod(echo.entries().at("control.r_min")), 2.5);

  // Feeding the echo back reproduces it exactly.
  const fs::path again = dir / "again";
  ASSERT_EQ(cli({"gen", "-c", (out / "config.toml").string(), "-o", again.string()}).code, 0);
  EXPECT_EQ(slurp(out / "config.toml"), slurp(again / "config.toml"));
  EXPECT_EQ(slurp(out / "suites.txt"), slurp(again / "suites.txt"));

  // Writing the echo over the input is refused.
  EXPECT_EQ(cli({"gen", "-c", (out / "config.toml").string(), "-o", out.string()}).code, 1);
}

TEST(Cli, TrainWritesParametersAndResumes) {
  const fs::path dir = temp_dir("train");
  const std::vector<std::string> base = {"train", "-o", dir.string(), "--set",
                                         "train.batch_size=2"};
  auto args = base;
  args.insert(args.end(), {"--set", "train.iterations=2"});
  const CliResult first = cli(args);
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_TRUE(fs::exists(dir / "params.bin"));
  EXPECT_TRUE(fs::exists(dir / "record.csv"));

  args = base;
  args.insert(args.end(), {"--set", "train.iterations=4", "--resume"});
  const CliResult second = cli(args);
  ASSERT_EQ(second.code, 0) << second.err;
  EXPECT_NE(second.out.find("trained 4 iterations"), std::string::npos) << second.out;
  EXPECT_NO_THROW(load_params((dir / "params.bin").string()));
}

TEST(Cli, EvalOnAnOpenSceneDrawsInsideTheView) {
  const fs::path dir = temp_dir("eval");
  OccupancyGrid g(200, 200, 0.1);
  g.close_border();
  save_grid((dir / "open.txt").string(), g);
  {
    ManifestEntry e;
    e.start = Pose2(8.0, 10.0, 0.2);
    e.goal = Vec2(12.0, 10.5);
    e.grid_file = "open.txt";
    std::ofstream os(dir / "manifest.csv");
    write_manifest(os, {e});
  }
  const fs::path out = dir / "run";
  const CliResult r = cli({"eval", "-o", out.string(), "-p", tiny_params().string(), "--manifest",
                     (dir / "manifest.csv").string(), "--id", "0", "--controller", "pid"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"grid.txt", "reference.csv", "optimized.csv", "executed.csv",
                        "trace.csv", "summary.txt", "eval.svg"})
    EXPECT_TRUE(fs::exists(out / f)) << f;

  const std::string svg = slurp(out / "eval.svg");
  EXPECT_NE(svg.find("viewBox=\"0 0 400.00 400.00\""), std::string::npos);
  const auto lines = polylines(svg);
  ASSERT_TRUE(lines.count("reference"));
  ASSERT_TRUE(lines.count("executed"));
  for (const auto& [name, pts] : lines) {
    for (const auto& [x, y] : pts) {
      EXPECT_GE(x, 0.0) << name;
      EXPECT_LE(x, 400.0) << name;
      EXPECT_GE(y, 0.0) << name;
      EXPECT_LE(y, 400.0) << name;
    }
  }
  // The first executed point is the start pose, y flipped at 20 px/m.
  EXPECT_NEAR(lines.at("executed").front().first, 160.0, 0.01);
  EXPECT_NEAR(lines.at("executed").front().second, 400.0 - 200.0, 0.01);
  EXPECT_NE(svg.find("class=\"goal\" cx=\"240.00\" cy=\"190.00\""), std::string::npos);

  // Replay renders the same picture from the stored files.
  const fs::path replay = dir / "replay";
  ASSERT_EQ(cli({"replay", "-o", replay.string(), "--run", out.string()}).code, 0);
  EXPECT_EQ(slurp(replay / "replay.svg"), svg);
  EXPECT_EQ(cli({"replay", "-o", out.string(), "--run", out.string()}).code, 1);
}

TEST(Cli, EvalClosedLoopOnGeneratedScene) {
  const fs::path dir = temp_dir("eval_closed");
  const CliResult r = cli({"eval", "-o", dir.string(), "-p", tiny_params().string(), "--archetype",
                     "campus", "--closed-loop", "--set", "control.timeout=5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("campus"), std::string::npos);
  EXPECT_NE(slurp(dir / "summary.txt").find("outcome "), std::string::npos);
  EXPECT_EQ(cli({"eval", "-o", dir.string(), "-p", tiny_params().string(), "--archetype",
                 "volcano"})
                .code,
            1);
}

TEST(Cli, BenchSmokeRunWritesTablesAndTraces) {
  const fs::path dir = temp_dir("bench");
  const auto t0 = std::chrono::steady_clock::now();
  const CliResult r = cli({"bench", "-o", dir.string(), "--smoke", "-P", "a=" + tiny_params().string(),
                     "-P", "b=" + tiny_params().string()});
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LT(seconds, 300.0);

  const BenchSuite tracking = load_suite((dir / "suites" / "tracking" / "manifest.csv").string());
  EXPECT_EQ(tracking.scenarios.size(), 10u);
  EXPECT_NE(slurp(dir / "suites.txt").find(hash_hex(tracking.hash())), std::string::npos);

  // Header plus one row per scenario, planner and controller.
  const std::string episodes = slurp(dir / "tracking_episodes.csv");
  EXPECT_EQ(std::count(episodes.begin(), episodes.end(), '\n'), 1 + 10 * 2 * 2);
  const std::string nav = slurp(dir / "navigation_episodes.csv");
  EXPECT_EQ(std::count(nav.begin(), nav.end(), '\n'), 1 + 10 * 2);
  EXPECT_EQ(slurp(dir / "tables.txt").empty(), false);
  EXPECT_NE(r.out.find("success rate"), std::string::npos);

  int traces = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "traces"))
    traces += e.is_regular_file();
  EXPECT_EQ(traces, 10 * 2 * 2 + 10 * 2);

  EXPECT_EQ(cli({"bench", "-o", dir.string(), "--smoke", "-P", "a,b=" + tiny_params().string()})
                .code,
            1);
  EXPECT_EQ(cli({"bench", "-o", dir.string(), "--smoke", "-P", tiny_params().string()}).code, 1);
}

TEST(Cli, SweepWritesChart) {
  const fs::path dir = temp_dir("sweep");
  const CliResult r = cli({"sweep", "-o", dir.string(), "--smoke", "-P", "net=" + tiny_params().string(),
                     "--set", "bench.radii=0.5,2.0", "--set", "bench.traces=false"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string svg = slurp(dir / "sweep.svg");
  std::size_t series = 0;
  for (std::size_t p = svg.find("class=\"series\""); p != std::string::npos;
       p = svg.find("class=\"series\"", p + 1))
    ++series;
  EXPECT_EQ(series, 2u);
  const std::string summary = slurp(dir / "sweep_summary.csv");
  EXPECT_NE(summary.find("0.5"), std::string::npos);
  EXPECT_NE(summary.find("2"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "traces"));
}

}  // namespace
}  // namespace kinplan
