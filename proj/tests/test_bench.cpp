#include "kinplan/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "kinplan/errors.hpp"
#include "kinplan/random.hpp"

namespace kinplan {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kinplan_bench_" + name);
  fs::remove_all(p);
  return p;
}

// Straight body-frame reference to the goal.
Contender straight_contender(const std::string& name) {
  return {name, [](const RangeScan&, const Vec2& goal) {
            std::vector<Pose2> out;
            const double h = std::atan2(goal.y(), goal.x());
            for (int i = 0; i <= 50; ++i) {
              const Vec2 p = goal * (i / 50.0);
              out.emplace_back(p.x(), p.y(), h);
            }
            return out;
          }};
}

// Left arc of radius 1 m, tighter than most robots under test.
Contender arc_contender(const std::string& name) {
  return {name, [](const RangeScan&, const Vec2&) {
            std::vector<Pose2> out;
            for (int i = 0; i <= 50; ++i) {
              const double a = 4.0 * i / 50.0;
              out.emplace_back(std::sin(a), 1.0 - std::cos(a), a);
            }
            return out;
          }};
}

int count_lines(const std::string& s) {
  return static_cast<int>(std::count(s.begin(), s.end(), '\n'));
}

int count_columns(const std::string& line) {
  return static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
}

// Open room with the goal ahead of the start, inside the sensor view.
BenchSuite empty_suite(int n, double goal_distance) {
  BenchSuite suite;
  Rng rng(3);
  for (int i = 0; i < n; ++i) {
    OccupancyGrid g(200, 200, 0.1);
    g.close_border();
    Scenario s;
    s.grid = std::make_shared<OccupancyGrid>(std::move(g));
    s.archetype = kAllArchetypes[i % 4];
    s.seed = static_cast<std::uint64_t>(i);
    s.start = Pose2(uniform(rng, 6.0, 14.0), uniform(rng, 6.0, 14.0), uniform(rng, -3.0, 3.0));
    const double bearing = uniform(rng, -0.5, 0.5);
    s.goal = s.start.translation() +
             goal_distance * Vec2(std::cos(s.start.psi + bearing), std::sin(s.start.psi + bearing));
    suite.scenarios.push_back(std::move(s));
  }
  return suite;
}

// Walled corridor along x with the goal straight ahead.
BenchSuite corridor_suite(int n) {
  BenchSuite suite;
  for (int i = 0; i < n; ++i) {
    OccupancyGrid g(120, 30, 0.1);
    g.close_border();
    Scenario s;
    s.grid = std::make_shared<OccupancyGrid>(std::move(g));
    s.archetype = kAllArchetypes[i % 4];
    s.start = Pose2(1.0 + 0.1 * i, 1.5, 0.0);
    s.goal = Vec2(9.0 + 0.1 * i, 1.5);
    suite.scenarios.push_back(std::move(s));
  }
  return suite;
}

class BenchTest : public ::testing::Test {
 protected:
  static const BenchSuite& suite() {
    static const BenchSuite s = make_suite(8, 11, GenerationParams{});
    return s;
  }
};

TEST_F(BenchTest, SuiteIsDeterministicAndBalanced) {
  const BenchSuite again = make_suite(8, 11, GenerationParams{});
  EXPECT_EQ(suite().hash(), again.hash());
  EXPECT_NE(suite().hash(), make_suite(8, 12, GenerationParams{}).hash());
  for (std::size_t i = 0; i < suite().scenarios.size(); ++i)
    EXPECT_EQ(suite().scenarios[i].archetype, kAllArchetypes[i % 4]);
  EXPECT_EQ(hash_hex(0x1fULL), "000000000000001f");
}

TEST(Bench, ConfiguredSuitesFollowTheRootSeed) {
  BenchConfig c;
  c.tracking_scenarios = 4;
  c.navigation_episodes = 4;
  const auto t = tracking_suite(c), n = navigation_suite(c);
  EXPECT_EQ(t.scenarios.size(), 4u);
  EXPECT_NE(t.hash(), n.hash());
  EXPECT_EQ(t.hash(), tracking_suite(c).hash());
  c.seed = 2;
  EXPECT_NE(t.hash(), tracking_suite(c).hash());
}

TEST_F(BenchTest, SaveLoadKeepsTheHash) {
  const fs::path dir = temp_dir("suite");
  save_suite(dir.string(), suite());
  const BenchSuite back = load_suite((dir / "manifest.csv").string());
  EXPECT_EQ(back.hash(), suite().hash());
  ASSERT_EQ(back.scenarios.size(), suite().scenarios.size());
  EXPECT_EQ(back.scenarios[3].goal, suite().scenarios[3].goal);
  fs::remove_all(dir);
}

TEST_F(BenchTest, IdenticalPlannersGiveIdenticalColumns) {
  BenchConfig c;
  const PlannerParams p = PlannerParams::init(NetworkShape{}, 5);
  const TrackingTable t = tracking_table(
      suite(), {network_contender("a", p, c.pipeline), network_contender("b", p, c.pipeline)}, c);
  ASSERT_EQ(t.episodes.size(), suite().scenarios.size() * 2 * 2);
  for (ControllerKind k : {ControllerKind::kPid, ControllerKind::kMpc}) {
    EXPECT_EQ(t.mean("a", k), t.mean("b", k));
    for (Archetype a : kAllArchetypes) EXPECT_EQ(t.mean("a", k, a), t.mean("b", k, a));
  }
  for (const auto& e : t.episodes) {
    if (e.planner != "a") continue;
    const auto twin = std::find_if(t.episodes.begin(), t.episodes.end(), [&](const auto& o) {
      return o.planner == "b" && o.scenario == e.scenario && o.controller == e.controller;
    });
    ASSERT_NE(twin, t.episodes.end());
    EXPECT_EQ(twin->mean_error, e.mean_error);
    EXPECT_EQ(twin->steps, e.steps);
    EXPECT_EQ(twin->outcome, e.outcome);
  }
  EXPECT_EQ(t.suite_hash, suite().hash());
}

TEST_F(BenchTest, OutputIsIndependentOfWorkerCount) {
  BenchConfig c;
  const PlannerParams p = PlannerParams::init(NetworkShape{}, 6);
  const std::vector<Contender> cs{network_contender("net", p, c.pipeline),
                                  straight_contender("line")};
  const TrackingTable serial = tracking_table(suite(), cs, c);
  c.jobs = 3;
  const TrackingTable parallel = tracking_table(suite(), cs, c);
  std::ostringstream a, b;
  write_tracking_episodes(a, serial);
  write_tracking_episodes(b, parallel);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Bench, StraightCorridorsTrackWithinTenCentimetres) {
  BenchConfig c;
  c.control.r_min = 0.5;
  const TrackingTable t = tracking_table(corridor_suite(8), {straight_contender("line")}, c);
  for (const auto& e : t.episodes) {
    EXPECT_TRUE(e.planned);
    EXPECT_EQ(e.outcome, Outcome::kReached);
    EXPECT_LT(e.mean_error, 0.1);
  }
  EXPECT_LT(t.mean("line", ControllerKind::kPid), 0.1);
  EXPECT_LT(t.mean("line", ControllerKind::kMpc), 0.1);
}

TEST_F(BenchTest, SingleRadiusSweepEqualsTrackingTable) {
  BenchConfig c;
  c.radii = "1.48";
  const std::vector<Contender> cs{straight_contender("line"),
                                  network_contender("net", PlannerParams::init(NetworkShape{}, 2),
                                                    c.pipeline)};
  std::ostringstream a, b;
  write_tracking_episodes(a, radius_sweep(suite(), cs, c));
  write_tracking_episodes(b, tracking_table(suite(), cs, c));
  EXPECT_EQ(a.str(), b.str());
}

TEST_F(BenchTest, SweepCoversEveryRadius) {
  BenchConfig c;
  c.radii = "0.5, 1.0,3";
  const TrackingTable t = radius_sweep(suite(), {straight_contender("line")}, c);
  EXPECT_EQ(t.radii(), (std::vector<double>{0.5, 1.0, 3.0}));
  EXPECT_EQ(t.episodes.size(), 3u * suite().scenarios.size() * 2);
  for (double r : t.radii())
    EXPECT_EQ(t.count("line", ControllerKind::kMpc, {}, r),
              static_cast<int>(suite().scenarios.size()));
}

TEST_F(BenchTest, ExecutionsAndSolverPlansAreFeasible) {
  BenchConfig c;
  c.radii = "0.5,1.48,3.0";
  const TrackingTable t = radius_sweep(
      suite(),
      {network_contender("net", PlannerParams::init(NetworkShape{}, 9), c.pipeline),
       arc_contender("arc")},
      c);
  int solved = 0;
  for (const auto& e : t.episodes) {
    if (!e.planned) continue;
    EXPECT_LE(e.max_curvature, 1.0 / e.r_min + 1e-9);
    EXPECT_LT(e.max_defect, 1e-10);
    EXPECT_LE(e.solver.max_curvature, 1.0 / e.r_min + 1e-9);
    EXPECT_LT(e.solver.max_defect, 1e-10);
    // Every executed MPC step is the first step of an audited solution.
    if (e.controller == ControllerKind::kMpc && e.max_curvature > 0.0) {
      EXPECT_GE(e.solver.max_curvature, e.max_curvature - 1e-9);
      ++solved;
    }
  }
  EXPECT_GT(solved, 0);
}

TEST(Bench, EmptyGridsAreAlwaysSolvedByAStraightPlanner) {
  BenchConfig c;
  const SuccessTable t = success_table(empty_suite(12, 4.0), {straight_contender("line")}, c);
  EXPECT_EQ(t.successes("line"), 12);
  EXPECT_DOUBLE_EQ(t.rate("line"), 1.0);
  for (Archetype a : kAllArchetypes) EXPECT_EQ(t.total("line", a), 3);
}

TEST_F(BenchTest, ZeroWaypointPlannerNeverSucceeds) {
  BenchConfig c;
  PlannerParams zero(NetworkShape{});
  const SuccessTable t = success_table(suite(), {network_contender("zero", zero, c.pipeline)}, c);
  EXPECT_EQ(t.successes("zero"), 0);
  for (const auto& e : t.episodes) EXPECT_EQ(e.outcome, Outcome::kDeadlock);
  const TrackingTable tt = tracking_table(suite(), {network_contender("zero", zero, c.pipeline)}, c);
  for (const auto& e : tt.episodes) EXPECT_FALSE(e.planned);
  EXPECT_TRUE(std::isnan(tt.mean("zero", ControllerKind::kMpc)));
}

TEST_F(BenchTest, TracesBackEveryEpisode) {
  BenchConfig c;
  const fs::path dir = temp_dir("traces");
  const TrackingTable t = tracking_table(suite(), {straight_contender("line")}, c, dir.string());
  for (const auto& e : t.episodes) {
    std::ifstream in(dir / trace_name(e.planner, e.controller, e.r_min, e.scenario));
    ASSERT_TRUE(in) << e.scenario;
    const auto rows = read_trace(in);
    ASSERT_EQ(rows.size(), e.steps);
    double sum = 0.0;
    for (const auto& r : rows) sum += r.error;
    EXPECT_NEAR(rows.empty() ? 0.0 : sum / static_cast<double>(rows.size()), e.mean_error, 1e-8);
  }
  const SuccessTable s =
      success_table(suite(), {straight_contender("line")}, c, ControllerKind::kPid, dir.string());
  for (const auto& e : s.episodes)
    EXPECT_TRUE(fs::exists(dir / trace_name("line-nav", ControllerKind::kPid, c.control.r_min,
                                            e.scenario)));
  fs::remove_all(dir);
}

TEST_F(BenchTest, CsvSchemas) {
  BenchConfig c;
  const TrackingTable t = tracking_table(suite(), {straight_contender("line")}, c);
  std::ostringstream ep, sum;
  write_tracking_episodes(ep, t);
  write_tracking_summary(sum, t);
  EXPECT_EQ(count_lines(ep.str()), 1 + static_cast<int>(t.episodes.size()));
  EXPECT_EQ(count_columns(ep.str().substr(0, ep.str().find('\n'))), 13);
  EXPECT_EQ(count_lines(sum.str()), 1 + 2 * 5);
  EXPECT_EQ(count_columns(sum.str().substr(0, sum.str().find('\n'))), 6);

  const SuccessTable s = success_table(suite(), {straight_contender("line")}, c);
  std::ostringstream nav, ss, printed;
  write_navigation_episodes(nav, s);
  write_success_summary(ss, s);
  EXPECT_EQ(count_lines(nav.str()), 1 + static_cast<int>(s.episodes.size()));
  EXPECT_EQ(count_columns(nav.str().substr(0, nav.str().find('\n'))), 10);
  EXPECT_EQ(count_lines(ss.str()), 1 + 5);
  print_success_table(printed, s);
  EXPECT_NE(printed.str().find("/2)"), std::string::npos);
}

TEST_F(BenchTest, SweepChartHasOneSeriesPerPlannerAndController) {
  BenchConfig c;
  c.radii = "0.5,1.48";
  const TrackingTable t =
      radius_sweep(suite(), {straight_contender("line"), straight_contender("copy")}, c);
  std::ostringstream svg;
  write_sweep_svg(svg, t);
  const std::string s = svg.str();
  EXPECT_EQ(s.rfind("<svg", 0), 0u);
  EXPECT_NE(s.find("</svg>"), std::string::npos);
  std::size_t series = 0;
  for (std::size_t at = 0; (at = s.find("class=\"series\"", at)) != std::string::npos; ++at)
    ++series;
  EXPECT_EQ(series, 4u);
  EXPECT_NE(s.find("line / mpc"), std::string::npos);
}

TEST(Bench, SceneSvgPlacesLayersInTheGridFrame) {
  OccupancyGrid g(40, 20, 0.1, Pose2(-1.0, 2.0, 0.0));
  g.set(0, 0, true);
  g.set(1, 0, true);
  g.set(5, 7, true);
  std::ostringstream os;
  write_scene_svg(os, g, {SceneLayer{"executed", "red", {Vec2(-1.0, 2.0), Vec2(3.0, 4.0)}}},
                  Vec2(1.0, 3.0), 10.0);
  const std::string s = os.str();
  EXPECT_NE(s.find("viewBox=\"0 0 40.00 20.00\""), std::string::npos);
  // Runs of occupied cells merge into one rectangle per row.
  EXPECT_NE(s.find("<rect x=\"0.00\" y=\"19.00\" width=\"2.00\" height=\"1.00\"/>"),
            std::string::npos);
  EXPECT_NE(s.find("<rect x=\"5.00\" y=\"12.00\" width=\"1.00\""), std::string::npos);
  EXPECT_NE(s.find("points=\"0.00,20.00 40.00,0.00 \""), std::string::npos);
  EXPECT_NE(s.find("cx=\"20.00\" cy=\"10.00\""), std::string::npos);
}

TEST(Bench, PosesRoundTrip) {
  const std::vector<Pose2> poses{Pose2(0.1, -2.0, 0.3), Pose2(1e-9, 3.0, -3.1)};
  std::stringstream ss;
  write_poses(ss, poses);
  const auto back = read_poses(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0], poses[0]);
  EXPECT_EQ(back[1], poses[1]);
  std::istringstream bad("x,y,psi\n1,2\n");
  EXPECT_THROW(read_poses(bad), FormatError);
}

TEST(Bench, ConfigValidation) {
  BenchConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.radius_values(), (std::vector<double>{0.5, 1.0, 1.48, 2.0, 3.0}));
  c.radii = "1.0,0.5";
  EXPECT_THROW(c.validate(), ConfigError);
  c.radii = "0.5,x";
  EXPECT_THROW(c.radius_values(), ConfigError);
  c.radii = "0,1";
  EXPECT_THROW(c.radius_values(), ConfigError);
  c.radii = "";
  EXPECT_THROW(c.radius_values(), ConfigError);
  c = {};
  c.tracking_scenarios = 0;
  EXPECT_THROW(c.validate(), ConfigError);

  ConfigSchema schema;
  BenchConfig bound;
  bind_bench_config(schema, bound);
  std::istringstream in("[bench]\nnavigation_episodes = 9\nradii = \"1,2\"\n");
  schema.apply(ConfigFile::parse(in, "test"));
  EXPECT_EQ(bound.navigation_episodes, 9);
  EXPECT_EQ(bound.radius_values(), (std::vector<double>{1.0, 2.0}));
}

TEST_F(BenchTest, ContenderNamesMustBeUniqueAndFileSafe) {
  BenchConfig c;
  EXPECT_THROW(tracking_table(suite(), {straight_contender("a"), straight_contender("a")}, c),
               std::invalid_argument);
  EXPECT_THROW(tracking_table(suite(), {straight_contender("a/b")}, c), std::invalid_argument);
  EXPECT_THROW(tracking_table(suite(), {Contender{"x", nullptr}}, c), std::invalid_argument);
}

TEST(Settings, SharesTheCommonSectionsWithTheBench) {
  Settings s;
  std::istringstream in(
      "seed = 11\n[train]\njobs = 3\n[control]\nr_min = 2.5\n[plan]\nhorizon = 30\n");
  s.apply(ConfigFile::parse(in, "test"));
  EXPECT_EQ(s.bench.seed, 11u);
  EXPECT_EQ(s.bench.jobs, 3);
  EXPECT_EQ(s.bench.control.r_min, 2.5);
  EXPECT_EQ(s.bench.pipeline.horizon, 30);

  Settings t;
  std::istringstream unknown("[bench]\nseed = 4\n");
  EXPECT_THROW(t.apply(ConfigFile::parse(unknown, "test")), ConfigError);
  Settings u;
  std::istringstream bad("[train]\nbatch_size = 0\n");
  EXPECT_THROW(u.apply(ConfigFile::parse(bad, "test")), ConfigError);
}

}  // namespace
}  // namespace kinplan
