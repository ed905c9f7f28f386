#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kinplan/config.hpp"
#include "kinplan/controllers.hpp"
#include "kinplan/envsim.hpp"
#include "kinplan/pipeline.hpp"
#include "kinplan/training.hpp"

namespace kinplan {

struct BenchConfig {
  std::uint64_t seed = 1;           // root seed; suites use their own streams
  int tracking_scenarios = 200;
  int navigation_episodes = 100;
  std::string radii = "0.5,1.0,1.48,2.0,3.0";  // sweep values, m, ascending
  int jobs = 1;
  bool traces = true;               // persist one trace CSV per episode

  ControllerConfig control{};
  PipelineConfig pipeline{};        // horizon and sensor of the planners
  GenerationParams env{};

  /// Parsed `radii`; throws ConfigError unless positive and ascending.
  std::vector<double> radius_values() const;
  void validate() const;
};

/// Binds the bench.* keys only. The root seed and the control, pipeline and
/// env keys are bound by their own modules.
void bind_bench_config(ConfigSchema& schema, BenchConfig& c);

/// Every configurable value of the tools under one schema: training, the
/// controllers and the benchmark. Not copyable, since the schema points into
/// the members.
struct Settings {
  TrainingConfig train;
  ControllerConfig control;
  BenchConfig bench;
  ConfigSchema schema;

  Settings();
  Settings(const Settings&) = delete;
  Settings& operator=(const Settings&) = delete;

  /// Applies file values, validates, and copies the shared controller,
  /// pipeline, environment, seed and worker settings into `bench`. Throws
  /// ConfigError.
  void apply(const ConfigFile& file);
};

/// Fixed scenario list. Archetypes cycle in kAllArchetypes order, so every
/// count divisible by four is balanced.
struct BenchSuite {
  std::vector<Scenario> scenarios;

  /// FNV-1a over the manifest CSV and every grid; equal hashes mean the
  /// suites are bit-identical.
  std::uint64_t hash() const;
  std::vector<ManifestEntry> manifest() const;
};

BenchSuite make_suite(int count, std::uint64_t seed, const GenerationParams& env);
/// Suites of the configured sizes on seed streams of the root seed that no
/// training stream uses.
BenchSuite tracking_suite(const BenchConfig& config);
BenchSuite navigation_suite(const BenchConfig& config);
/// Writes manifest.csv and one grid file per scenario into dir.
void save_suite(const std::string& dir, const BenchSuite& suite);
/// Reads a manifest and the grid files it names, relative to its directory.
BenchSuite load_suite(const std::string& manifest_path);
std::string hash_hex(std::uint64_t h);

/// A planner under comparison.
struct Contender {
  std::string name;
  LocalPlanner planner;
};

Contender network_contender(const std::string& name, const PlannerParams& params,
                            const PipelineConfig& pipeline);

struct TrackingEpisode {
  int scenario = 0;
  Archetype archetype = Archetype::kForest;
  std::string planner;
  ControllerKind controller = ControllerKind::kPid;
  double r_min = 0.0;
  bool planned = false;           // false: the planner returned no reference
  Outcome outcome = Outcome::kInfeasible;
  double mean_error = 0.0;        // m, 0 without a plan
  std::size_t steps = 0;
  double max_curvature = 0.0;     // executed path, 1/m
  double max_defect = 0.0;        // executed path re-rolled through the robot model
  Tracker::Audit solver;          // MPC tracker solutions, zero for PID
};

struct TrackingTable {
  std::uint64_t suite_hash = 0;
  std::vector<TrackingEpisode> episodes;  // sorted by (r_min, scenario, planner, controller)

  /// Mean of the per-episode mean errors over planned episodes; NaN if none.
  double mean(const std::string& planner, ControllerKind controller,
              std::optional<Archetype> archetype = std::nullopt,
              std::optional<double> r_min = std::nullopt) const;
  /// Planned episodes in the cell.
  int count(const std::string& planner, ControllerKind controller,
            std::optional<Archetype> archetype = std::nullopt,
            std::optional<double> r_min = std::nullopt) const;
  std::vector<std::string> planners() const;
  std::vector<double> radii() const;
};

/// Plans once per scenario and contender from the start pose, then tracks
/// the world-frame reference with each controller at every radius, starting
/// from the scenario start pose. Execution is obstacle-free: the table
/// measures tracking, not avoidance. With a non-empty trace_dir one trace
/// per episode is written there.
TrackingTable tracking_runs(const BenchSuite& suite, const std::vector<Contender>& contenders,
                            const BenchConfig& config, const std::vector<double>& radii,
                            const std::string& trace_dir = "");
/// tracking_runs at config.control.r_min.
TrackingTable tracking_table(const BenchSuite& suite, const std::vector<Contender>& contenders,
                             const BenchConfig& config, const std::string& trace_dir = "");
/// tracking_runs over config.radius_values().
TrackingTable radius_sweep(const BenchSuite& suite, const std::vector<Contender>& contenders,
                           const BenchConfig& config, const std::string& trace_dir = "");

struct NavigationEpisode {
  int scenario = 0;
  Archetype archetype = Archetype::kForest;
  std::string planner;
  Outcome outcome = Outcome::kTimeout;
  double sim_time = 0.0;
  std::size_t steps = 0;
  double max_curvature = 0.0;
  double max_defect = 0.0;
  Tracker::Audit solver;
};

struct SuccessTable {
  std::uint64_t suite_hash = 0;
  ControllerKind controller = ControllerKind::kMpc;
  std::vector<NavigationEpisode> episodes;  // sorted by (scenario, planner)

  int successes(const std::string& planner, std::optional<Archetype> archetype = std::nullopt) const;
  int total(const std::string& planner, std::optional<Archetype> archetype = std::nullopt) const;
  double rate(const std::string& planner, std::optional<Archetype> archetype = std::nullopt) const;
  std::vector<std::string> planners() const;
};

/// Closed-loop navigation of every scenario with the given controller.
/// Success is the reached outcome; collision, deadlock, timeout and
/// infeasible all count as failures.
SuccessTable success_table(const BenchSuite& suite, const std::vector<Contender>& contenders,
                           const BenchConfig& config,
                           ControllerKind controller = ControllerKind::kMpc,
                           const std::string& trace_dir = "");

// Outputs. CSV schemas:
//   tracking episodes: r_min,scenario,archetype,planner,controller,planned,
//                      outcome,mean_error,steps,max_curvature,max_defect,
//                      solver_curvature,solver_defect
//   tracking summary:  r_min,planner,controller,archetype,mean_error,episodes
//                      (archetype "all" aggregates every archetype)
//   navigation episodes: scenario,archetype,planner,outcome,sim_time,steps,
//                        max_curvature,max_defect,solver_curvature,solver_defect
//   success summary:   planner,archetype,successes,total,rate
void write_tracking_episodes(std::ostream& os, const TrackingTable& t);
void write_tracking_summary(std::ostream& os, const TrackingTable& t);
void write_navigation_episodes(std::ostream& os, const SuccessTable& t);
void write_success_summary(std::ostream& os, const SuccessTable& t);
/// Fixed-width human-readable tables.
void print_tracking_table(std::ostream& os, const TrackingTable& t);
void print_success_table(std::ostream& os, const SuccessTable& t);

/// Line chart of mean error against radius, one series per planner and
/// controller, as a standalone SVG document.
void write_sweep_svg(std::ostream& os, const TrackingTable& sweep);

/// Polyline drawn over a scene; `name` becomes the SVG class.
struct SceneLayer {
  std::string name;
  std::string color;
  std::vector<Vec2> points;  // world frame
  bool dashed = false;
};

/// Top-down view in the grid frame at `pixels_per_meter`: occupied cells,
/// each layer as one polyline, and an optional goal marker.
void write_scene_svg(std::ostream& os, const OccupancyGrid& grid,
                     const std::vector<SceneLayer>& layers,
                     const std::optional<Vec2>& goal = std::nullopt,
                     double pixels_per_meter = 20.0);

/// Pose list CSV with header x,y,psi.
void write_poses(std::ostream& os, std::span<const Pose2> poses);
std::vector<Pose2> read_poses(std::istream& is);

/// Trace file name used for an episode.
std::string trace_name(const std::string& planner, ControllerKind controller, double r_min,
                       int scenario);

}  // namespace kinplan
