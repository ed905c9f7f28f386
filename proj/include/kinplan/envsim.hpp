#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "kinplan/se2.hpp"

namespace kinplan {

/// Boolean occupancy lattice; cell (i, j) has its center at
/// origin.transform(((i + 0.5) * resolution, (j + 0.5) * resolution)).
struct OccupancyGrid {
  int width = 0;
  int height = 0;
  double resolution = 0.1;
  Pose2 origin{};
  std::vector<std::uint8_t> cells;  // row-major, index j * width + i

  OccupancyGrid() = default;
  OccupancyGrid(int w, int h, double res, Pose2 org = {});

  bool inside(int i, int j) const { return i >= 0 && j >= 0 && i < width && j < height; }
  bool occupied(int i, int j) const { return cells[index(i, j)] != 0; }
  void set(int i, int j, bool occ) { cells[index(i, j)] = occ ? 1 : 0; }
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(i);
  }

  Vec2 cell_center(int i, int j) const;
  /// World point to continuous grid coordinates in cell units (cell centers
  /// sit at half-integers).
  Vec2 to_grid(const Vec2& world) const;
  double extent_x() const { return width * resolution; }
  double extent_y() const { return height * resolution; }

  /// Occupies the outer ring of cells.
  void close_border();
  /// Marks every cell whose center lies inside the disc.
  void fill_disc(const Vec2& center, double radius);
  /// Marks every cell whose center lies inside the axis-aligned box given in
  /// grid-local meters.
  void fill_box(double x0, double y0, double x1, double y1);

  std::size_t occupied_count() const;

  /// Throws std::invalid_argument unless resolution > 0, sizes match, at least
  /// one cell is free and the border is closed.
  void validate() const;

  bool operator==(const OccupancyGrid&) const = default;
};

enum class Archetype { kForest, kGarage, kIndoor, kCampus };

std::string_view archetype_name(Archetype a);
Archetype parse_archetype(std::string_view name);
inline constexpr Archetype kAllArchetypes[] = {Archetype::kForest, Archetype::kGarage,
                                               Archetype::kIndoor, Archetype::kCampus};

struct GenerationParams {
  double width_m = 32.0;
  double height_m = 32.0;
  double resolution = 0.1;
  double robot_radius = 0.35;

  double forest_density = 2.0;  // trees per 100 m^2
  double tree_radius_min = 0.15;
  double tree_radius_max = 0.45;
  double tree_gap = 1.2;  // minimum free space between trunks

  double garage_bay = 8.0;
  double wall_thickness = 0.2;
  double door_width = 2.0;
  int garage_pillars = 12;

  double corridor_width = 2.0;
  double maze_loop_fraction = 0.25;

  int campus_buildings = 6;
  double campus_tree_density = 0.8;

  double goal_min_distance = 3.0;
  double goal_max_distance = 10.0;
  /// Bound on the free-space path length from start to goal as a multiple of
  /// the straight-line distance; 0 accepts any goal with clearance.
  double max_detour = 1.5;
  /// Largest |bearing| of the goal seen from the start pose, rad; pi leaves
  /// the start heading unconstrained.
  double max_goal_bearing = 0.75;

  /// Throws std::invalid_argument for negative densities or corridors/doors
  /// narrower than twice the robot diameter.
  void validate() const;
};

struct Scenario {
  std::shared_ptr<const OccupancyGrid> grid;
  Pose2 start{};
  Vec2 goal{0.0, 0.0};  // world frame
  Archetype archetype = Archetype::kForest;
  std::uint64_t seed = 0;

  /// Goal expressed in the body frame of the start pose.
  Vec2 goal_in_body() const { return start.inverse_transform(goal); }
};

/// Builds only the obstacle layout of an archetype; deterministic per seed.
OccupancyGrid generate_grid(Archetype archetype, std::uint64_t seed,
                            const GenerationParams& params);

/// Start/goal sampler bound to one grid. Cells whose centers are in
/// collision are precomputed once; with max_detour > 0 a goal is accepted
/// only if an 8-connected path through free cells reaches it within
/// max_detour times the straight-line distance.
class TaskSampler {
 public:
  TaskSampler(const OccupancyGrid& grid, const GenerationParams& params);

  /// Throws GenerationFailed after max_attempts start draws.
  void sample(std::uint64_t seed, Pose2& start, Vec2& goal, int max_attempts = 1000) const;

  /// Shortest 8-connected free-cell path length in meters between the cells
  /// of two points; infinity when unreachable within `limit`.
  double path_length(const Vec2& from, const Vec2& to, double limit) const;

 private:
  const OccupancyGrid* grid_;
  GenerationParams params_;
  std::vector<std::uint8_t> blocked_;
};

/// Rejection-samples a start/goal pair with clearance on an existing grid.
/// Throws GenerationFailed after max_attempts.
void sample_task(const OccupancyGrid& grid, std::uint64_t seed,
                 const GenerationParams& params, Pose2& start, Vec2& goal,
                 int max_attempts = 1000);

Scenario generate(Archetype archetype, std::uint64_t seed, const GenerationParams& params);

struct RangeScan {
  std::vector<double> beams;
  double fov = 0.0;
  double max_range = 0.0;
};

struct SensorParams {
  int n_beams = 64;
  double fov = 87.0 * 3.14159265358979323846 / 180.0;
  double max_range = 10.0;
};

/// DDA traversal per beam; beam i points at psi - fov/2 + i * fov / (n - 1).
/// Throws PoseInCollision when the pose sits in an occupied cell.
RangeScan raycast(const OccupancyGrid& grid, const Pose2& pose, int n_beams, double fov,
                  double max_range);
inline RangeScan raycast(const OccupancyGrid& grid, const Pose2& pose,
                         const SensorParams& s) {
  return raycast(grid, pose, s.n_beams, s.fov, s.max_range);
}

/// True iff an occupied cell center lies strictly within robot_radius of the
/// pose position. Positions off the grid count as colliding.
bool in_collision(const OccupancyGrid& grid, const Pose2& pose, double robot_radius);
bool in_collision(const OccupancyGrid& grid, const Vec2& p, double robot_radius);

// Plain-text grid format:
//   line 1: width height resolution
//   line 2: origin x y psi
//   then one line per row j = 0..height-1: run lengths alternating free /
//   occupied, always starting with a (possibly zero) free run.
void write_grid(std::ostream& os, const OccupancyGrid& grid);
OccupancyGrid read_grid(std::istream& is);
void save_grid(const std::string& path, const OccupancyGrid& grid);
OccupancyGrid load_grid(const std::string& path);

// Scenario manifest CSV; header
//   id,seed,archetype,start_x,start_y,start_psi,goal_x,goal_y,grid_file
struct ManifestEntry {
  int id = 0;
  std::uint64_t seed = 0;
  Archetype archetype = Archetype::kForest;
  Pose2 start{};
  Vec2 goal{0.0, 0.0};
  std::string grid_file;
};

void write_manifest(std::ostream& os, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> read_manifest(std::istream& is);

}  // namespace kinplan
