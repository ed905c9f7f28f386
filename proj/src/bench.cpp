#include "kinplan/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "kinplan/errors.hpp"
#include "kinplan/parallel.hpp"
#include "kinplan/random.hpp"

namespace kinplan {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

std::vector<double> BenchConfig::radius_values() const {
  std::vector<double> out;
  std::stringstream ss(radii);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double r = 0.0;
    try {
      r = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ConfigError("bench.radii: cannot parse '" + item + "'");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos)
      throw ConfigError("bench.radii: cannot parse '" + item + "'");
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("bench.radii: radii must be positive");
    if (!out.empty() && r <= out.back()) throw ConfigError("bench.radii: radii must ascend");
    out.push_back(r);
  }
  if (out.empty()) throw ConfigError("bench.radii: empty list");
  return out;
}

void BenchConfig::validate() const {
  if (tracking_scenarios < 1) throw ConfigError("bench.tracking_scenarios: must be >= 1");
  if (navigation_episodes < 1) throw ConfigError("bench.navigation_episodes: must be >= 1");
  if (jobs < 1) throw ConfigError("bench.jobs: must be >= 1");
  radius_values();
  control.validate();
  pipeline.validate();
  try {
    env.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("env: ") + e.what());
  }
}

void bind_bench_config(ConfigSchema& s, BenchConfig& c) {
  s.add("bench.tracking_scenarios", &c.tracking_scenarios, "plan-and-track pairs");
  s.add("bench.navigation_episodes", &c.navigation_episodes, "closed-loop episodes");
  s.add("bench.radii", &c.radii, "comma-separated ascending sweep radii, m");
  s.add("bench.traces", &c.traces, "write one trace CSV per episode");
}

Settings::Settings() {
  bind_training_config(schema, train);
  bind_controller_config(schema, control);
  bind_bench_config(schema, bench);
}

void Settings::apply(const ConfigFile& file) {
  schema.apply(file);
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  bench.control = control;
  bench.pipeline = train.pipeline;
  bench.env = train.env;
  bench.seed = train.seed;
  bench.jobs = train.jobs;
  bench.validate();
}

// ---------------------------------------------------------------------------
// Suites

namespace {

// Root-seed streams; training uses 1 to 5.
constexpr std::uint64_t kStreamTrackingSuite = 101;
constexpr std::uint64_t kStreamNavigationSuite = 102;

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv(std::uint64_t& h, const std::string& bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
}

std::string grid_file_name(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "grid_%04d.txt", id);
  return buf;
}

}  // namespace

std::vector<ManifestEntry> BenchSuite::manifest() const {
  std::vector<ManifestEntry> out;
  out.reserve(scenarios.size());
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const Scenario& s = scenarios[i];
    out.push_back({static_cast<int>(i), s.seed, s.archetype, s.start, s.goal,
                   grid_file_name(static_cast<int>(i))});
  }
  return out;
}

std::uint64_t BenchSuite::hash() const {
  std::uint64_t h = kFnvOffset;
  std::ostringstream m;
  write_manifest(m, manifest());
  fnv(h, m.str());
  for (const Scenario& s : scenarios) {
    std::ostringstream g;
    if (s.grid) write_grid(g, *s.grid);
    fnv(h, g.str());
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

BenchSuite make_suite(int count, std::uint64_t seed, const GenerationParams& env) {
  if (count < 0) throw std::invalid_argument("make_suite: negative count");
  BenchSuite suite;
  suite.scenarios.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    suite.scenarios[static_cast<std::size_t>(i)] =
        generate(kAllArchetypes[i % 4], derive_seed(seed, static_cast<std::uint64_t>(i)), env);
  return suite;
}

BenchSuite tracking_suite(const BenchConfig& config) {
  return make_suite(config.tracking_scenarios, derive_seed(config.seed, kStreamTrackingSuite),
                    config.env);
}

BenchSuite navigation_suite(const BenchConfig& config) {
  return make_suite(config.navigation_episodes, derive_seed(config.seed, kStreamNavigationSuite),
                    config.env);
}

void save_suite(const std::string& dir, const BenchSuite& suite) {
  fs::create_directories(dir);
  const auto entries = suite.manifest();
  std::ofstream m(fs::path(dir) / "manifest.csv");
  if (!m) throw std::runtime_error("save_suite: cannot write " + dir + "/manifest.csv");
  write_manifest(m, entries);
  for (std::size_t i = 0; i < entries.size(); ++i)
    save_grid((fs::path(dir) / entries[i].grid_file).string(), *suite.scenarios[i].grid);
}

BenchSuite load_suite(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("load_suite: cannot open " + manifest_path);
  const auto entries = read_manifest(in);
  const fs::path base = fs::path(manifest_path).parent_path();
  BenchSuite suite;
  for (const auto& e : entries) {
    if (e.id != static_cast<int>(suite.scenarios.size()))
      throw FormatError("load_suite: ids must run 0, 1, 2, ...");
    Scenario s;
    s.grid = std::make_shared<OccupancyGrid>(load_grid((base / e.grid_file).string()));
    s.start = e.start;
    s.goal = e.goal;
    s.archetype = e.archetype;
    s.seed = e.seed;
    suite.scenarios.push_back(std::move(s));
  }
  return suite;
}

Contender network_contender(const std::string& name, const PlannerParams& params,
                            const PipelineConfig& pipeline) {
  return {name, network_planner(params, pipeline.horizon)};
}

std::string trace_name(const std::string& planner, ControllerKind controller, double r_min,
                       int scenario) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "_r%.3f_s%04d.csv", r_min, scenario);
  return planner + "_" + std::string(controller_name(controller)) + buf;
}

// ---------------------------------------------------------------------------
// Tables

namespace {

constexpr ControllerKind kControllers[] = {ControllerKind::kPid, ControllerKind::kMpc};

void write_trace_file(const std::string& dir, const std::string& name, const ExecutionResult& r,
                      double dt) {
  std::ofstream os(fs::path(dir) / name);
  if (!os) throw std::runtime_error("bench: cannot write trace " + name);
  write_trace(os, r, dt);
}

void check_contenders(const std::vector<Contender>& contenders) {
  std::set<std::string> names;
  for (const auto& c : contenders) {
    if (c.name.empty() || !c.planner) throw std::invalid_argument("bench: incomplete contender");
    if (c.name.find_first_of(",/\\ <>&\"") != std::string::npos)
      throw std::invalid_argument("bench: contender name '" + c.name + "' not file-safe");
    if (!names.insert(c.name).second)
      throw std::invalid_argument("bench: duplicate contender " + c.name);
  }
}

bool close_radius(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, b); }

}  // namespace

TrackingTable tracking_runs(const BenchSuite& suite, const std::vector<Contender>& contenders,
                            const BenchConfig& config, const std::vector<double>& radii,
                            const std::string& trace_dir) {
  check_contenders(contenders);
  for (std::size_t i = 0; i < radii.size(); ++i)
    if (!(radii[i] > 0.0) || (i > 0 && radii[i] <= radii[i - 1]))
      throw std::invalid_argument("tracking_runs: radii must be positive and ascending");
  if (!trace_dir.empty()) fs::create_directories(trace_dir);

  const std::size_t n = suite.scenarios.size();
  std::vector<std::vector<TrackingEpisode>> slots(n);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    const Scenario& s = suite.scenarios[i];
    const RangeScan scan = raycast(*s.grid, s.start, config.pipeline.sensor);
    const Vec2 goal_body = s.goal_in_body();
    for (const Contender& c : contenders) {
      const std::vector<Pose2> body = c.planner(scan, goal_body);
      const std::vector<Pose2> world =
          body.empty() ? std::vector<Pose2>{} : PipelineResult::to_world(s.start, body);
      for (double r : radii) {
        ControllerConfig cc = config.control;
        cc.r_min = r;
        const KinematicModel robot = cc.robot();
        for (ControllerKind k : kControllers) {
          TrackingEpisode e;
          e.scenario = static_cast<int>(i);
          e.archetype = s.archetype;
          e.planner = c.name;
          e.controller = k;
          e.r_min = r;
          e.planned = !world.empty();
          if (e.planned) {
            const ExecutionResult run = track(k, world, cc, nullptr, s.start);
            e.outcome = run.outcome;
            e.mean_error = run.mean_error();
            e.steps = run.steps();
            e.max_curvature = max_step_curvature(run.executed.states);
            e.max_defect = max_rollout_defect(robot, run.executed);
            e.solver = run.solver_audit;
            if (!trace_dir.empty())
              write_trace_file(trace_dir, trace_name(c.name, k, r, e.scenario), run, cc.dt);
          }
          slots[i].push_back(std::move(e));
        }
      }
    }
  });

  TrackingTable t;
  t.suite_hash = suite.hash();
  for (auto& v : slots)
    for (auto& e : v) t.episodes.push_back(std::move(e));
  std::stable_sort(t.episodes.begin(), t.episodes.end(), [](const auto& a, const auto& b) {
    return std::tie(a.r_min, a.scenario, a.planner, a.controller) <
           std::tie(b.r_min, b.scenario, b.planner, b.controller);
  });
  return t;
}

TrackingTable tracking_table(const BenchSuite& suite, const std::vector<Contender>& contenders,
                             const BenchConfig& config, const std::string& trace_dir) {
  return tracking_runs(suite, contenders, config, {config.control.r_min}, trace_dir);
}

TrackingTable radius_sweep(const BenchSuite& suite, const std::vector<Contender>& contenders,
                           const BenchConfig& config, const std::string& trace_dir) {
  return tracking_runs(suite, contenders, config, config.radius_values(), trace_dir);
}

namespace {

template <typename Fn>
void for_cell(const TrackingTable& t, const std::string& planner, ControllerKind controller,
              std::optional<Archetype> archetype, std::optional<double> r_min, Fn&& fn) {
  for (const auto& e : t.episodes) {
    if (!e.planned || e.planner != planner || e.controller != controller) continue;
    if (archetype && e.archetype != *archetype) continue;
    if (r_min && !close_radius(e.r_min, *r_min)) continue;
    fn(e);
  }
}

}  // namespace

double TrackingTable::mean(const std::string& planner, ControllerKind controller,
                           std::optional<Archetype> archetype, std::optional<double> r_min) const {
  double sum = 0.0;
  int n = 0;
  for_cell(*this, planner, controller, archetype, r_min, [&](const TrackingEpisode& e) {
    sum += e.mean_error;
    ++n;
  });
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

int TrackingTable::count(const std::string& planner, ControllerKind controller,
                         std::optional<Archetype> archetype, std::optional<double> r_min) const {
  int n = 0;
  for_cell(*this, planner, controller, archetype, r_min, [&](const TrackingEpisode&) { ++n; });
  return n;
}

std::vector<std::string> TrackingTable::planners() const {
  std::vector<std::string> out;
  for (const auto& e : episodes)
    if (std::find(out.begin(), out.end(), e.planner) == out.end()) out.push_back(e.planner);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> TrackingTable::radii() const {
  std::vector<double> out;
  for (const auto& e : episodes)
    if (out.empty() || !close_radius(e.r_min, out.back())) out.push_back(e.r_min);
  return out;
}

SuccessTable success_table(const BenchSuite& suite, const std::vector<Contender>& contenders,
                           const BenchConfig& config, ControllerKind controller,
                           const std::string& trace_dir) {
  check_contenders(contenders);
  if (!trace_dir.empty()) fs::create_directories(trace_dir);
  const KinematicModel robot = config.control.robot();
  const std::size_t n = suite.scenarios.size();
  std::vector<std::vector<NavigationEpisode>> slots(n);
  parallel_for(n, config.jobs, [&](std::size_t i) {
    const Scenario& s = suite.scenarios[i];
    for (const Contender& c : contenders) {
      const ExecutionResult run =
          navigate(c.planner, s, controller, config.control, config.pipeline.sensor);
      NavigationEpisode e;
      e.scenario = static_cast<int>(i);
      e.archetype = s.archetype;
      e.planner = c.name;
      e.outcome = run.outcome;
      e.sim_time = run.sim_time;
      e.steps = run.steps();
      e.max_curvature = max_step_curvature(run.executed.states);
      e.max_defect = max_rollout_defect(robot, run.executed);
      e.solver = run.solver_audit;
      if (!trace_dir.empty())
        write_trace_file(trace_dir,
                         trace_name(c.name + "-nav", controller, config.control.r_min, e.scenario),
                         run, config.control.dt);
      slots[i].push_back(std::move(e));
    }
  });
  SuccessTable t;
  t.suite_hash = suite.hash();
  t.controller = controller;
  for (auto& v : slots)
    for (auto& e : v) t.episodes.push_back(std::move(e));
  std::stable_sort(t.episodes.begin(), t.episodes.end(), [](const auto& a, const auto& b) {
    return std::tie(a.scenario, a.planner) < std::tie(b.scenario, b.planner);
  });
  return t;
}

int SuccessTable::successes(const std::string& planner, std::optional<Archetype> archetype) const {
  int n = 0;
  for (const auto& e : episodes)
    if (e.planner == planner && (!archetype || e.archetype == *archetype) &&
        e.outcome == Outcome::kReached)
      ++n;
  return n;
}

int SuccessTable::total(const std::string& planner, std::optional<Archetype> archetype) const {
  int n = 0;
  for (const auto& e : episodes)
    if (e.planner == planner && (!archetype || e.archetype == *archetype)) ++n;
  return n;
}

double SuccessTable::rate(const std::string& planner, std::optional<Archetype> archetype) const {
  const int n = total(planner, archetype);
  return n ? static_cast<double>(successes(planner, archetype)) / n
           : std::numeric_limits<double>::quiet_NaN();
}

std::vector<std::string> SuccessTable::planners() const {
  std::vector<std::string> out;
  for (const auto& e : episodes)
    if (std::find(out.begin(), out.end(), e.planner) == out.end()) out.push_back(e.planner);
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Output

void write_tracking_episodes(std::ostream& os, const TrackingTable& t) {
  os << "r_min,scenario,archetype,planner,controller,planned,outcome,mean_error,steps,"
        "max_curvature,max_defect,solver_curvature,solver_defect\n";
  os << std::setprecision(10);
  for (const auto& e : t.episodes)
    os << e.r_min << ',' << e.scenario << ',' << archetype_name(e.archetype) << ',' << e.planner
       << ',' << controller_name(e.controller) << ',' << (e.planned ? 1 : 0) << ','
       << (e.planned ? outcome_name(e.outcome) : std::string_view("no_plan")) << ','
       << e.mean_error << ',' << e.steps << ',' << e.max_curvature << ',' << e.max_defect << ','
       << e.solver.max_curvature << ',' << e.solver.max_defect << '\n';
}

void write_tracking_summary(std::ostream& os, const TrackingTable& t) {
  os << "r_min,planner,controller,archetype,mean_error,episodes\n";
  os << std::setprecision(10);
  for (double r : t.radii())
    for (const auto& p : t.planners())
      for (ControllerKind k : kControllers) {
        os << r << ',' << p << ',' << controller_name(k) << ",all," << t.mean(p, k, {}, r) << ','
           << t.count(p, k, {}, r) << '\n';
        for (Archetype a : kAllArchetypes)
          os << r << ',' << p << ',' << controller_name(k) << ',' << archetype_name(a) << ','
             << t.mean(p, k, a, r) << ',' << t.count(p, k, a, r) << '\n';
      }
}

void write_navigation_episodes(std::ostream& os, const SuccessTable& t) {
  os << "scenario,archetype,planner,outcome,sim_time,steps,max_curvature,max_defect,"
        "solver_curvature,solver_defect\n";
  os << std::setprecision(10);
  for (const auto& e : t.episodes)
    os << e.scenario << ',' << archetype_name(e.archetype) << ',' << e.planner << ','
       << outcome_name(e.outcome) << ',' << e.sim_time << ',' << e.steps << ','
       << e.max_curvature << ',' << e.max_defect << ',' << e.solver.max_curvature << ','
       << e.solver.max_defect << '\n';
}

void write_success_summary(std::ostream& os, const SuccessTable& t) {
  os << "planner,archetype,successes,total,rate\n";
  os << std::setprecision(10);
  for (const auto& p : t.planners()) {
    for (Archetype a : kAllArchetypes)
      os << p << ',' << archetype_name(a) << ',' << t.successes(p, a) << ',' << t.total(p, a)
         << ',' << t.rate(p, a) << '\n';
    os << p << ",all," << t.successes(p) << ',' << t.total(p) << ',' << t.rate(p) << '\n';
  }
}

namespace {

std::size_t name_width(const std::vector<std::string>& names) {
  std::size_t w = 7;
  for (const auto& n : names) w = std::max(w, n.size());
  return w + 2;
}

}  // namespace

void print_tracking_table(std::ostream& os, const TrackingTable& t) {
  const auto planners = t.planners();
  const int w = static_cast<int>(name_width(planners));
  os << "suite " << hash_hex(t.suite_hash) << ", mean tracking error (m)\n";
  for (double r : t.radii()) {
    os << "r_min = " << std::fixed << std::setprecision(2) << r << " m\n";
    os << std::left << std::setw(w) << "planner" << std::setw(6) << "ctrl";
    for (Archetype a : kAllArchetypes) os << std::right << std::setw(10) << archetype_name(a);
    os << std::setw(10) << "all" << '\n';
    for (ControllerKind k : kControllers)
      for (const auto& p : planners) {
        os << std::left << std::setw(w) << p << std::setw(6) << controller_name(k) << std::right
           << std::setprecision(4);
        for (Archetype a : kAllArchetypes) os << std::setw(10) << t.mean(p, k, a, r);
        os << std::setw(10) << t.mean(p, k, {}, r) << '\n';
      }
  }
  os.unsetf(std::ios::floatfield);
  os << std::left;
}

void print_success_table(std::ostream& os, const SuccessTable& t) {
  const auto planners = t.planners();
  const int w = static_cast<int>(name_width(planners));
  os << "suite " << hash_hex(t.suite_hash) << ", success rate with "
     << controller_name(t.controller) << '\n';
  os << std::left << std::setw(w) << "planner";
  for (Archetype a : kAllArchetypes) os << std::right << std::setw(20) << archetype_name(a);
  os << std::setw(20) << "all" << '\n';
  auto cell = [&](const std::string& p, std::optional<Archetype> a) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(2) << 100.0 * t.rate(p, a) << "% (" << t.successes(p, a)
      << '/' << t.total(p, a) << ')';
    return c.str();
  };
  for (const auto& p : planners) {
    os << std::left << std::setw(w) << p << std::right;
    for (Archetype a : kAllArchetypes) os << std::setw(20) << cell(p, a);
    os << std::setw(20) << cell(p, {}) << '\n';
  }
  os << std::left;
}

void write_sweep_svg(std::ostream& os, const TrackingTable& sweep) {
  constexpr double W = 640, H = 420, left = 70, right = 190, top = 30, bottom = 60;
  const auto radii = sweep.radii();
  const auto planners = sweep.planners();
  struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
  };
  std::vector<Series> series;
  double y_max = 0.0;
  for (const auto& p : planners)
    for (ControllerKind k : kControllers) {
      Series s{p + " / " + std::string(controller_name(k)), {}};
      for (double r : radii) {
        const double m = sweep.mean(p, k, {}, r);
        if (std::isfinite(m)) {
          s.points.emplace_back(r, m);
          y_max = std::max(y_max, m);
        }
      }
      series.push_back(std::move(s));
    }
  if (y_max <= 0.0) y_max = 1.0;
  y_max *= 1.1;
  const double x_lo = radii.empty() ? 0.0 : radii.front();
  double x_hi = radii.empty() ? 1.0 : radii.back();
  if (x_hi <= x_lo) x_hi = x_lo + 1.0;
  const double pw = W - left - right, ph = H - top - bottom;
  auto X = [&](double r) { return left + (r - x_lo) / (x_hi - x_lo) * pw; };
  auto Y = [&](double e) { return top + ph - e / y_max * ph; };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
     << top + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
     << "\" stroke=\"black\"/>\n";
  for (double r : radii)
    os << "<line x1=\"" << X(r) << "\" y1=\"" << top + ph << "\" x2=\"" << X(r) << "\" y2=\""
       << top + ph + 5 << "\" stroke=\"black\"/>\n<text x=\"" << X(r) << "\" y=\""
       << top + ph + 20 << "\" text-anchor=\"middle\">" << r << "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double e = y_max * i / 5.0;
    os << "<line x1=\"" << left - 5 << "\" y1=\"" << Y(e) << "\" x2=\"" << left << "\" y2=\""
       << Y(e) << "\" stroke=\"black\"/>\n<text x=\"" << left - 8 << "\" y=\"" << Y(e) + 4
       << "\" text-anchor=\"end\">" << std::setprecision(3) << e << std::setprecision(2)
       << "</text>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15
     << "\" text-anchor=\"middle\">minimum turning radius (m)</text>\n";
  os << "<text transform=\"translate(18," << top + ph / 2
     << ") rotate(-90)\" text-anchor=\"middle\">mean tracking error (m)</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % std::size(kColors)];
    const bool dashed = i % 2 == 0;  // pid dashed, mpc solid
    os << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"2\"" << (dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
    for (const auto& [r, e] : series[i].points) os << X(r) << ',' << Y(e) << ' ';
    os << "\"/>\n";
    for (const auto& [r, e] : series[i].points)
      os << "<circle cx=\"" << X(r) << "\" cy=\"" << Y(e) << "\" r=\"3\" fill=\"" << color
         << "\"/>\n";
    const double ly = top + 10 + 20.0 * static_cast<double>(i);
    os << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 40
       << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\""
       << (dashed ? " stroke-dasharray=\"6,4\"" : "") << "/>\n<text x=\"" << left + pw + 45
       << "\" y=\"" << ly + 4 << "\">" << series[i].label << "</text>\n";
  }
  os << "</svg>\n";
  os.unsetf(std::ios::floatfield);
  os << std::setprecision(6);
}

// ---------------------------------------------------------------------------
// Scenes

void write_scene_svg(std::ostream& os, const OccupancyGrid& grid,
                     const std::vector<SceneLayer>& layers, const std::optional<Vec2>& goal,
                     double pixels_per_meter) {
  if (!(pixels_per_meter > 0.0)) throw std::invalid_argument("write_scene_svg: bad scale");
  const double px = grid.resolution * pixels_per_meter;
  const double W = grid.width * px, H = grid.height * px;
  // Grid-local meters to pixels, y pointing up.
  auto to_px = [&](const Vec2& world) {
    const Vec2 l = grid.origin.inverse_transform(world);
    return Vec2(l.x() * pixels_per_meter, H - l.y() * pixels_per_meter);
  };
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g class=\"obstacles\" fill=\"#444\">\n";
  for (int j = 0; j < grid.height; ++j) {
    for (int i = 0; i < grid.width;) {
      if (!grid.occupied(i, j)) {
        ++i;
        continue;
      }
      int run = i;
      while (run < grid.width && grid.occupied(run, j)) ++run;
      os << "<rect x=\"" << i * px << "\" y=\"" << H - (j + 1) * px << "\" width=\""
         << (run - i) * px << "\" height=\"" << px << "\"/>\n";
      i = run;
    }
  }
  os << "</g>\n";
  for (const SceneLayer& l : layers) {
    if (l.points.empty()) continue;
    os << "<polyline class=\"" << l.name << "\" fill=\"none\" stroke=\"" << l.color
       << "\" stroke-width=\"2\"" << (l.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
    for (const Vec2& p : l.points) {
      const Vec2 q = to_px(p);
      os << q.x() << ',' << q.y() << ' ';
    }
    os << "\"/>\n";
  }
  if (goal) {
    const Vec2 q = to_px(*goal);
    os << "<circle class=\"goal\" cx=\"" << q.x() << "\" cy=\"" << q.y()
       << "\" r=\"6\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"2\"/>\n";
  }
  os << "</svg>\n";
  os.unsetf(std::ios::floatfield);
  os << std::setprecision(6);
}

void write_poses(std::ostream& os, std::span<const Pose2> poses) {
  os << "x,y,psi\n" << std::setprecision(17);
  for (const Pose2& p : poses) os << p.x << ',' << p.y << ',' << p.psi << '\n';
  os << std::setprecision(6);
}

std::vector<Pose2> read_poses(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("x,y,psi", 0) != 0)
    throw FormatError("poses: missing header");
  std::vector<Pose2> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    double v[3];
    char sep = 0;
    if (!(row >> v[0] >> sep >> v[1] >> sep >> v[2]))
      throw FormatError("poses: malformed row '" + line + "'");
    out.emplace_back(v[0], v[1], v[2]);
  }
  return out;
}

}  // namespace kinplan
