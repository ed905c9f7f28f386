#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kinplan/bench.hpp"
#include "kinplan/controllers.hpp"
#include "kinplan/errors.hpp"
#include "kinplan/kinematics.hpp"
#include "kinplan/pipeline.hpp"
#include "kinplan/training.hpp"

namespace py = pybind11;
using namespace kinplan;

namespace {

using PoseArray = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using PointArray = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

PoseArray to_array(const std::vector<Pose2>& poses) {
  PoseArray a(static_cast<Eigen::Index>(poses.size()), 3);
  for (std::size_t i = 0; i < poses.size(); ++i) a.row(static_cast<Eigen::Index>(i)) = poses[i].vector();
  return a;
}

std::vector<Pose2> to_poses(const Eigen::Ref<const PoseArray>& a) {
  std::vector<Pose2> out;
  out.reserve(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) out.emplace_back(a(i, 0), a(i, 1), a(i, 2));
  return out;
}

/// Settings with dotted-key overrides from a dict; values go through the same
/// parser as config files.
class Config {
 public:
  explicit Config(const py::dict& overrides, const std::string& path) {
    ConfigFile file = path.empty() ? ConfigFile{} : ConfigFile::load(path);
    for (const auto& [k, v] : overrides)
      file.set(py::str(k), py::str(v));
    settings_.apply(file);
  }
  Settings& settings() { return settings_; }
  std::string dump() const {
    std::ostringstream os;
    settings_.schema.write(os);
    return os.str();
  }

 private:
  Settings settings_;
};

ControllerKind controller(const std::string& name) {
  return parse_controller(name);
}

py::dict execution_dict(const ExecutionResult& r) {
  py::dict d;
  d["outcome"] = std::string(outcome_name(r.outcome));
  d["states"] = to_array(r.executed.states);
  d["errors"] = r.errors;
  d["sim_time"] = r.sim_time;
  d["mean_error"] = r.mean_error();
  d["steps"] = r.steps();
  d["solver_max_curvature"] = r.solver_audit.max_curvature;
  d["solver_max_defect"] = r.solver_audit.max_defect;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Kinematics-aware learned local planner";

  // Translators run newest first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  py::class_<Pose2>(m, "Pose2")
      .def(py::init<double, double, double>(), py::arg("x") = 0.0, py::arg("y") = 0.0,
           py::arg("psi") = 0.0)
      .def_readonly("x", &Pose2::x)
      .def_readonly("y", &Pose2::y)
      .def_readonly("psi", &Pose2::psi)
      .def("transform", &Pose2::transform)
      .def("inverse_transform", &Pose2::inverse_transform)
      .def("compose", [](const Pose2& a, const Pose2& b) { return compose(a, b); })
      .def("inverse", [](const Pose2& p) { return inverse(p); })
      .def("vector", &Pose2::vector)
      .def("__repr__", [](const Pose2& p) {
        std::ostringstream os;
        os << "Pose2(" << p.x << ", " << p.y << ", " << p.psi << ")";
        return os.str();
      });
  m.def("wrap_angle", &wrap_angle);

  py::class_<OccupancyGrid, std::shared_ptr<OccupancyGrid>>(m, "OccupancyGrid")
      .def(py::init<int, int, double, Pose2>(), py::arg("width"), py::arg("height"),
           py::arg("resolution"), py::arg("origin") = Pose2{})
      .def_readonly("width", &OccupancyGrid::width)
      .def_readonly("height", &OccupancyGrid::height)
      .def_readonly("resolution", &OccupancyGrid::resolution)
      .def_readonly("origin", &OccupancyGrid::origin)
      .def("occupied", &OccupancyGrid::occupied)
      .def("set", &OccupancyGrid::set)
      .def("close_border", &OccupancyGrid::close_border)
      .def("fill_disc", &OccupancyGrid::fill_disc)
      .def("fill_box", &OccupancyGrid::fill_box)
      .def("occupied_count", &OccupancyGrid::occupied_count)
      .def("in_collision",
           [](const OccupancyGrid& g, const Pose2& p, double r) { return in_collision(g, p, r); })
      .def("array", [](const OccupancyGrid& g) {
        // Rows are j (y), columns are i (x).
        Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a(g.height,
                                                                                        g.width);
        for (int j = 0; j < g.height; ++j)
          for (int i = 0; i < g.width; ++i) a(j, i) = g.cells[g.index(i, j)];
        return a;
      });
  m.def("load_grid", &load_grid);
  m.def("save_grid", &save_grid);

  py::class_<Scenario>(m, "Scenario")
      .def_property_readonly("grid",
                             [](const Scenario& s) { return std::make_shared<OccupancyGrid>(*s.grid); })
      .def_readonly("start", &Scenario::start)
      .def_readonly("goal", &Scenario::goal)
      .def_property_readonly("archetype",
                             [](const Scenario& s) { return std::string(archetype_name(s.archetype)); })
      .def_readonly("seed", &Scenario::seed);
  m.def("archetypes", [] {
    std::vector<std::string> out;
    for (Archetype a : kAllArchetypes) out.emplace_back(archetype_name(a));
    return out;
  });
  m.def(
      "generate",
      [](const std::string& archetype, std::uint64_t seed, Config* config) {
        const GenerationParams env = config ? config->settings().train.env : GenerationParams{};
        return generate(parse_archetype(archetype), seed, env);
      },
      py::arg("archetype"), py::arg("seed"), py::arg("config") = nullptr);
  m.def(
      "raycast",
      [](const OccupancyGrid& g, const Pose2& pose, int n_beams, double fov, double max_range) {
        return raycast(g, pose, n_beams, fov, max_range).beams;
      },
      py::arg("grid"), py::arg("pose"), py::arg("n_beams") = 64,
      py::arg("fov") = SensorParams{}.fov, py::arg("max_range") = 10.0);

  py::class_<Config>(m, "Config")
      .def(py::init<const py::dict&, const std::string&>(), py::arg("overrides") = py::dict(),
           py::arg("path") = "")
      .def("dump", &Config::dump)
      .def("keys", [](Config& c) { return c.settings().schema.keys(); })
      .def_property_readonly("seed", [](Config& c) { return c.settings().train.seed; });

  py::class_<PlannerParams>(m, "PlannerParams")
      .def_property_readonly("size", &PlannerParams::size)
      .def_property_readonly("values",
                             [](const PlannerParams& p) { return Eigen::VectorXd(p.values()); })
      .def("all_finite", &PlannerParams::all_finite)
      .def("__eq__", &PlannerParams::operator==);
  m.def("load_params", &load_params);
  m.def("save_params", &save_params);
  m.def(
      "train",
      [](Config& c, const std::string& output_dir, bool resume) {
        TrainOptions o;
        o.output_dir = output_dir;
        o.resume = resume;
        py::gil_scoped_release release;
        return train(c.settings().train, o).params;
      },
      py::arg("config"), py::arg("output_dir") = "", py::arg("resume") = false);

  m.def(
      "plan",
      [](const PlannerParams& params, const OccupancyGrid& grid, const Pose2& start,
         const Vec2& goal, Config& c) {
        const PipelineResult r = run_pipeline(params, grid, start, goal, c.settings().train.pipeline);
        py::dict d;
        d["waypoints"] = [&] {
          PointArray a(static_cast<Eigen::Index>(r.output.waypoints.points.size()), 2);
          for (std::size_t i = 0; i < r.output.waypoints.points.size(); ++i)
            a.row(static_cast<Eigen::Index>(i)) = r.output.waypoints.points[i];
          return a;
        }();
        d["safety_score"] = r.output.waypoints.safety_score;
        d["reference"] = to_array(PipelineResult::to_world(start, r.reference.states));
        d["optimized"] = to_array(PipelineResult::to_world(start, r.optimized));
        d["converged"] = r.solution ? py::cast(r.solution->converged) : py::none();
        return d;
      },
      py::arg("params"), py::arg("grid"), py::arg("start"), py::arg("goal"), py::arg("config"));

  m.def(
      "track",
      [](const std::string& kind, const Eigen::Ref<const PoseArray>& reference, Config& c,
         const OccupancyGrid* grid) {
        return execution_dict(track(controller(kind), to_poses(reference), c.settings().control, grid));
      },
      py::arg("controller"), py::arg("reference"), py::arg("config"), py::arg("grid") = nullptr);
  m.def(
      "navigate",
      [](const PlannerParams& params, const Scenario& s, const std::string& kind, Config& c) {
        return execution_dict(
            navigate(params, s, controller(kind), c.settings().control, c.settings().train.pipeline));
      },
      py::arg("params"), py::arg("scenario"), py::arg("controller"), py::arg("config"));

  m.def(
      "max_step_curvature",
      [](const Eigen::Ref<const PoseArray>& states) { return max_step_curvature(to_poses(states)); },
      py::arg("states"));
}
