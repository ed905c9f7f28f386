#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kinplan/bench.hpp"
#include "kinplan/controllers.hpp"
#include "kinplan/errors.hpp"
#include "kinplan/random.hpp"
#include "kinplan/training.hpp"

namespace kinplan::cli {
namespace {

namespace fs = std::filesystem;

// Root-seed stream of the scenario generated by `eval` without a manifest.
constexpr std::uint64_t kStreamEvalScenario = 103;
constexpr int kSmokeScenarios = 10;

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool needs_out = true) {
  app->add_option("-c,--config", c.config, "TOML-style configuration file");
  app->add_option("-s,--set", c.overrides, "override, dotted.key=value (repeatable)");
  app->add_option("--seed", c.seed, "root seed, same as --set seed=N");
  app->add_option("-j,--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  auto* out = app->add_option("-o,--out", c.out, "output directory");
  if (needs_out) out->required();
}

/// Loads config, overrides and flags, validates, and echoes the effective
/// configuration into the output directory.
std::unique_ptr<Settings> load_settings(const Common& c) {
  auto s = std::make_unique<Settings>();
  ConfigFile file = c.config.empty() ? ConfigFile{} : ConfigFile::load(c.config);
  for (const auto& o : c.overrides) file.apply_override(o);
  if (c.seed) file.set("seed", std::to_string(*c.seed));
  if (c.jobs) file.set("train.jobs", std::to_string(*c.jobs));
  s->apply(file);

  if (!c.out.empty()) {
    fs::create_directories(c.out);
    const fs::path echo = fs::path(c.out) / "config.toml";
    if (!c.config.empty() && fs::exists(echo) && fs::equivalent(echo, c.config))
      throw ConfigError("--out would overwrite the input configuration " + c.config);
    write_effective_config(echo.string(), s->schema);
  }
  return s;
}

template <typename Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  fn(os);
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::vector<Vec2> positions(std::span<const Pose2> poses) {
  std::vector<Vec2> out;
  out.reserve(poses.size());
  for (const Pose2& p : poses) out.push_back(p.translation());
  return out;
}

/// "name=path" planner arguments to contenders.
std::vector<Contender> load_contenders(const std::vector<std::string>& specs,
                                       const PipelineConfig& pipeline) {
  std::vector<Contender> out;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
      throw ConfigError("--planner expects name=path, got '" + spec + "'");
    const std::string path = spec.substr(eq + 1);
    if (!fs::exists(path)) throw std::runtime_error("missing checkpoint " + path);
    out.push_back(network_contender(spec.substr(0, eq), load_params(path), pipeline));
  }
  return out;
}

/// Parameters from a params.bin or a training checkpoint.
PlannerParams load_any_params(const std::string& path, const TrainingConfig& config) {
  if (!fs::exists(path)) throw std::runtime_error("missing checkpoint " + path);
  try {
    return load_params(path);
  } catch (const FormatError&) {
    return load_checkpoint(path, config).params;
  }
}

void write_hashes(const fs::path& path, const BenchSuite* tracking, const BenchSuite* navigation) {
  write_file(path, [&](std::ostream& os) {
    if (tracking) os << "tracking " << hash_hex(tracking->hash()) << '\n';
    if (navigation) os << "navigation " << hash_hex(navigation->hash()) << '\n';
  });
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_gen(const Common& c, std::ostream& out) {
  const auto s = load_settings(c);
  const BenchSuite t = tracking_suite(s->bench);
  const BenchSuite n = navigation_suite(s->bench);
  save_suite((fs::path(c.out) / "tracking").string(), t);
  save_suite((fs::path(c.out) / "navigation").string(), n);
  write_hashes(fs::path(c.out) / "suites.txt", &t, &n);
  out << "tracking suite " << t.scenarios.size() << " scenarios, hash " << hash_hex(t.hash())
      << "\nnavigation suite " << n.scenarios.size() << " scenarios, hash "
      << hash_hex(n.hash()) << '\n';
  return 0;
}

int cmd_train(const Common& c, bool resume, bool verbose, std::ostream& out) {
  const auto s = load_settings(c);
  TrainOptions o;
  o.output_dir = c.out;
  o.resume = resume;
  o.verbose = verbose;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainingState state = train(s->train, o);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out << "trained " << state.completed << " iterations in " << seconds << " s; parameters in "
      << (fs::path(c.out) / "params.bin").string() << '\n';
  return 0;
}

struct EvalOptions {
  std::string params;
  std::string manifest;
  int id = 0;
  std::string archetype = "forest";
  std::string controller = "mpc";
  bool closed_loop = false;
};

int cmd_eval(const Common& c, const EvalOptions& e, std::ostream& out) {
  const auto s = load_settings(c);
  const ControllerKind kind = parse_controller(e.controller);
  Scenario scenario;
  if (!e.manifest.empty()) {
    const BenchSuite suite = load_suite(e.manifest);
    if (e.id < 0 || e.id >= static_cast<int>(suite.scenarios.size()))
      throw ConfigError("--id out of range for " + e.manifest);
    scenario = suite.scenarios[static_cast<std::size_t>(e.id)];
  } else {
    Archetype a;
    try {
      a = parse_archetype(e.archetype);
    } catch (const std::invalid_argument& err) {
      throw ConfigError(err.what());
    }
    scenario = generate(a, derive_seed(s->train.seed, kStreamEvalScenario), s->train.env);
  }
  const PlannerParams params = load_any_params(e.params, s->train);
  const PipelineResult plan =
      run_pipeline(params, *scenario.grid, scenario.start, scenario.goal, s->train.pipeline);
  const std::vector<Pose2> reference =
      PipelineResult::to_world(scenario.start, plan.reference.states);
  const std::vector<Pose2> optimized = PipelineResult::to_world(scenario.start, plan.optimized);

  const ExecutionResult run =
      e.closed_loop ? navigate(params, scenario, kind, s->control, s->train.pipeline)
                    : track(kind, reference, s->control, scenario.grid.get(), scenario.start);

  const fs::path dir(c.out);
  save_grid((dir / "grid.txt").string(), *scenario.grid);
  write_file(dir / "scenario.csv", [&](std::ostream& os) {
    BenchSuite one;
    one.scenarios.push_back(scenario);
    auto entries = one.manifest();
    entries[0].grid_file = "grid.txt";
    write_manifest(os, entries);
  });
  write_file(dir / "reference.csv", [&](std::ostream& os) { write_poses(os, reference); });
  write_file(dir / "optimized.csv", [&](std::ostream& os) { write_poses(os, optimized); });
  write_file(dir / "executed.csv",
             [&](std::ostream& os) { write_poses(os, run.executed.states); });
  write_file(dir / "trace.csv", [&](std::ostream& os) { write_trace(os, run, s->control.dt); });
  write_file(dir / "eval.svg", [&](std::ostream& os) {
    write_scene_svg(os, *scenario.grid,
                    {{"reference", "#1f77b4", positions(reference), true},
                     {"optimized", "#ff7f0e", positions(optimized), false},
                     {"executed", "#d62728", positions(run.executed.states), false}},
                    scenario.goal);
  });
  write_file(dir / "summary.txt", [&](std::ostream& os) {
    os << "outcome " << outcome_name(run.outcome) << "\nsteps " << run.steps() << "\nsim_time "
       << run.sim_time << "\nmean_error " << run.mean_error() << "\nmpc_converged "
       << (plan.solution && plan.solution->converged ? 1 : 0) << '\n';
  });
  out << archetype_name(scenario.archetype) << " scenario, " << controller_name(kind) << ": "
      << outcome_name(run.outcome) << " after " << run.sim_time << " s, mean error "
      << run.mean_error() << " m\n";
  return 0;
}

int cmd_replay(const Common& c, const std::string& run_dir, std::ostream& out) {
  const fs::path in(run_dir);
  if (!fs::is_directory(in)) throw std::runtime_error("no run directory " + run_dir);
  fs::create_directories(c.out);
  if (fs::equivalent(in, c.out)) throw ConfigError("--out must differ from --run");
  load_settings(c);
  const OccupancyGrid grid = load_grid((in / "grid.txt").string());
  auto read = [&](const std::string& name) {
    std::ifstream is(in / name);
    if (!is) throw std::runtime_error("missing " + (in / name).string());
    return read_poses(is);
  };
  const auto reference = read("reference.csv");
  std::vector<Pose2> optimized;
  if (fs::exists(in / "optimized.csv")) optimized = read("optimized.csv");
  std::ifstream ts(in / "trace.csv");
  if (!ts) throw std::runtime_error("missing " + (in / "trace.csv").string());
  const auto rows = read_trace(ts);
  std::optional<Vec2> goal;
  if (fs::exists(in / "scenario.csv")) {
    std::ifstream ms(in / "scenario.csv");
    const auto entries = read_manifest(ms);
    if (!entries.empty()) goal = entries.front().goal;
  }
  // The trace holds the poses after each step; the run starts at the
  // reference origin.
  std::vector<Vec2> executed;
  if (!reference.empty()) executed.push_back(reference.front().translation());
  for (const auto& r : rows) executed.emplace_back(r.x, r.y);
  write_file(fs::path(c.out) / "replay.svg", [&](std::ostream& os) {
    write_scene_svg(os, grid,
                    {{"reference", "#1f77b4", positions(reference), true},
                     {"optimized", "#ff7f0e", positions(optimized), false},
                     {"executed", "#d62728", executed, false}},
                    goal);
  });
  out << "replayed " << rows.size() << " steps into "
      << (fs::path(c.out) / "replay.svg").string() << '\n';
  return 0;
}

struct BenchOptions {
  std::vector<std::string> planners;
  bool smoke = false;
  std::string controller = "mpc";
};

int cmd_bench(const Common& c, const BenchOptions& b, std::ostream& out) {
  const auto s = load_settings(c);
  BenchConfig cfg = s->bench;
  if (b.smoke) cfg.tracking_scenarios = cfg.navigation_episodes = kSmokeScenarios;
  const auto contenders = load_contenders(b.planners, cfg.pipeline);
  const ControllerKind kind = parse_controller(b.controller);
  const fs::path dir(c.out);
  const BenchSuite t = tracking_suite(cfg);
  const BenchSuite n = navigation_suite(cfg);
  save_suite((dir / "suites" / "tracking").string(), t);
  save_suite((dir / "suites" / "navigation").string(), n);
  write_hashes(dir / "suites.txt", &t, &n);

  const std::string traces = cfg.traces ? (dir / "traces").string() : std::string();
  const TrackingTable tt =
      tracking_table(t, contenders, cfg, traces.empty() ? "" : traces + "/tracking");
  const SuccessTable st =
      success_table(n, contenders, cfg, kind, traces.empty() ? "" : traces + "/navigation");
  write_file(dir / "tracking_episodes.csv", [&](auto& os) { write_tracking_episodes(os, tt); });
  write_file(dir / "tracking_summary.csv", [&](auto& os) { write_tracking_summary(os, tt); });
  write_file(dir / "navigation_episodes.csv",
             [&](auto& os) { write_navigation_episodes(os, st); });
  write_file(dir / "success_summary.csv", [&](auto& os) { write_success_summary(os, st); });
  write_file(dir / "tables.txt", [&](auto& os) {
    print_tracking_table(os, tt);
    os << '\n';
    print_success_table(os, st);
  });
  print_tracking_table(out, tt);
  out << '\n';
  print_success_table(out, st);
  return 0;
}

int cmd_sweep(const Common& c, const BenchOptions& b, std::ostream& out) {
  const auto s = load_settings(c);
  BenchConfig cfg = s->bench;
  if (b.smoke) cfg.tracking_scenarios = kSmokeScenarios;
  const auto contenders = load_contenders(b.planners, cfg.pipeline);
  const fs::path dir(c.out);
  const BenchSuite t = tracking_suite(cfg);
  save_suite((dir / "suites" / "tracking").string(), t);
  write_hashes(dir / "suites.txt", &t, nullptr);
  const TrackingTable sweep =
      radius_sweep(t, contenders, cfg, cfg.traces ? (dir / "traces").string() : "");
  write_file(dir / "sweep_episodes.csv", [&](auto& os) { write_tracking_episodes(os, sweep); });
  write_file(dir / "sweep_summary.csv", [&](auto& os) { write_tracking_summary(os, sweep); });
  write_file(dir / "sweep.svg", [&](auto& os) { write_sweep_svg(os, sweep); });
  print_tracking_table(out, sweep);
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kinematics-aware local planner: scenarios, training, evaluation, benchmarks"};
  app.require_subcommand(1);

  Common common;
  auto* gen = app.add_subcommand("gen", "write the tracking and navigation scenario suites");
  add_common(gen, common);

  bool resume = false, verbose = false;
  auto* train_cmd = app.add_subcommand("train", "train a planner");
  add_common(train_cmd, common);
  train_cmd->add_flag("--resume", resume, "continue from the latest checkpoint in --out");
  train_cmd->add_flag("-v,--verbose", verbose, "progress to standard error");

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "plan and execute one scenario with full output");
  add_common(eval, common);
  eval->add_option("-p,--params", eval_opts.params, "parameters or checkpoint")->required();
  eval->add_option("--manifest", eval_opts.manifest, "scenario manifest");
  eval->add_option("--id", eval_opts.id, "scenario id in the manifest");
  eval->add_option("--archetype", eval_opts.archetype,
                   "generated scene when no manifest is given");
  eval->add_option("--controller", eval_opts.controller, "pid or mpc");
  eval->add_flag("--closed-loop", eval_opts.closed_loop, "replan while driving");

  BenchOptions bench_opts;
  auto* bench = app.add_subcommand("bench", "tracking and success tables");
  add_common(bench, common);
  bench->add_option("-P,--planner", bench_opts.planners, "name=path (repeatable)")->required();
  bench->add_flag("--smoke", bench_opts.smoke, "10-scenario suites");
  bench->add_option("--controller", bench_opts.controller, "controller for the success table");

  auto* sweep = app.add_subcommand("sweep", "tracking error against turning radius");
  add_common(sweep, common);
  sweep->add_option("-P,--planner", bench_opts.planners, "name=path (repeatable)")->required();
  sweep->add_flag("--smoke", bench_opts.smoke, "10-scenario suite");

  std::string run_dir;
  auto* replay = app.add_subcommand("replay", "re-render the SVG of a stored eval run");
  add_common(replay, common);
  replay->add_option("--run", run_dir, "eval output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen(common, out);
    if (train_cmd->parsed()) return cmd_train(common, resume, verbose, out);
    if (eval->parsed()) return cmd_eval(common, eval_opts, out);
    if (bench->parsed()) return cmd_bench(common, bench_opts, out);
    if (sweep->parsed()) return cmd_sweep(common, bench_opts, out);
    if (replay->parsed()) return cmd_replay(common, run_dir, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "invalid argument: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace kinplan::cli
