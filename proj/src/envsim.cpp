#include "kinplan/envsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "kinplan/errors.hpp"
#include "kinplan/random.hpp"

namespace kinplan {

OccupancyGrid::OccupancyGrid(int w, int h, double res, Pose2 org)
    : width(w), height(h), resolution(res), origin(org),
      cells(static_cast<std::size_t>(std::max(w, 0)) * static_cast<std::size_t>(std::max(h, 0)),
            0) {}

Vec2 OccupancyGrid::cell_center(int i, int j) const {
  return origin.transform(Vec2((i + 0.5) * resolution, (j + 0.5) * resolution));
}

Vec2 OccupancyGrid::to_grid(const Vec2& world) const {
  return origin.inverse_transform(world) / resolution;
}

void OccupancyGrid::close_border() {
  for (int i = 0; i < width; ++i) {
    set(i, 0, true);
    set(i, height - 1, true);
  }
  for (int j = 0; j < height; ++j) {
    set(0, j, true);
    set(width - 1, j, true);
  }
}

void OccupancyGrid::fill_disc(const Vec2& center, double radius) {
  const Vec2 g = to_grid(center);
  const double rc = radius / resolution;
  const int i0 = std::max(0, static_cast<int>(std::floor(g.x() - rc - 0.5)));
  const int i1 = std::min(width - 1, static_cast<int>(std::ceil(g.x() + rc)));
  const int j0 = std::max(0, static_cast<int>(std::floor(g.y() - rc - 0.5)));
  const int j1 = std::min(height - 1, static_cast<int>(std::ceil(g.y() + rc)));
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      const double dx = i + 0.5 - g.x(), dy = j + 0.5 - g.y();
      if (dx * dx + dy * dy <= rc * rc) set(i, j, true);
    }
}

void OccupancyGrid::fill_box(double x0, double y0, double x1, double y1) {
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  const int i0 = std::max(0, static_cast<int>(std::ceil(x0 / resolution - 0.5)));
  const int i1 = std::min(width - 1, static_cast<int>(std::floor(x1 / resolution - 0.5)));
  const int j0 = std::max(0, static_cast<int>(std::ceil(y0 / resolution - 0.5)));
  const int j1 = std::min(height - 1, static_cast<int>(std::floor(y1 / resolution - 0.5)));
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) set(i, j, true);
}

std::size_t OccupancyGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), std::uint8_t{1}));
}

void OccupancyGrid::validate() const {
  if (!(resolution > 0.0)) throw std::invalid_argument("grid: resolution must be positive");
  if (width <= 0 || height <= 0 ||
      cells.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw std::invalid_argument("grid: inconsistent dimensions");
  if (occupied_count() == cells.size()) throw std::invalid_argument("grid: no free cell");
  for (int i = 0; i < width; ++i)
    if (!occupied(i, 0) || !occupied(i, height - 1))
      throw std::invalid_argument("grid: border not closed");
  for (int j = 0; j < height; ++j)
    if (!occupied(0, j) || !occupied(width - 1, j))
      throw std::invalid_argument("grid: border not closed");
}

std::string_view archetype_name(Archetype a) {
  switch (a) {
    case Archetype::kForest: return "forest";
    case Archetype::kGarage: return "garage";
    case Archetype::kIndoor: return "indoor";
    case Archetype::kCampus: return "campus";
  }
  return "forest";
}

Archetype parse_archetype(std::string_view name) {
  for (Archetype a : kAllArchetypes)
    if (archetype_name(a) == name) return a;
  throw std::invalid_argument("unknown archetype: " + std::string(name));
}

void GenerationParams::validate() const {
  const double diameter = 2.0 * robot_radius;
  if (!(width_m > 0.0) || !(height_m > 0.0) || !(resolution > 0.0))
    throw std::invalid_argument("generation: world size and resolution must be positive");
  if (forest_density < 0.0 || campus_tree_density < 0.0 || garage_pillars < 0 ||
      campus_buildings < 0)
    throw std::invalid_argument("generation: densities must be non-negative");
  if (corridor_width < 2.0 * diameter || door_width < 2.0 * diameter)
    throw std::invalid_argument("generation: corridors and doors need twice the robot diameter");
  if (tree_radius_min <= 0.0 || tree_radius_max < tree_radius_min)
    throw std::invalid_argument("generation: bad tree radius range");
  if (!(goal_max_distance >= goal_min_distance) || goal_min_distance < 0.0)
    throw std::invalid_argument("generation: bad goal distance range");
  if (max_detour != 0.0 && !(max_detour >= 1.0))
    throw std::invalid_argument("generation: max_detour must be 0 or at least 1");
  if (!(max_goal_bearing >= 0.0 && max_goal_bearing <= std::numbers::pi))
    throw std::invalid_argument("generation: max_goal_bearing must lie in [0, pi]");
}

namespace {

struct Disc {
  Vec2 c;
  double r;
};

// Dart-throwing Poisson disk sampling of trunks with a minimum free gap.
void scatter_trees(OccupancyGrid& grid, Rng& rng, double density, const GenerationParams& p,
                   double margin) {
  const double area = grid.extent_x() * grid.extent_y();
  const int target = static_cast<int>(std::round(density * area / 100.0));
  if (target <= 0) return;
  std::vector<Disc> placed;
  const int attempts = 30 * target;
  for (int a = 0; a < attempts && static_cast<int>(placed.size()) < target; ++a) {
    const double r = uniform(rng, p.tree_radius_min, p.tree_radius_max);
    const Vec2 c(uniform(rng, margin, grid.extent_x() - margin),
                 uniform(rng, margin, grid.extent_y() - margin));
    bool ok = true;
    for (const auto& d : placed)
      if ((d.c - c).norm() < d.r + r + p.tree_gap) {
        ok = false;
        break;
      }
    if (!ok) continue;
    placed.push_back({c, r});
    grid.fill_disc(grid.origin.transform(c), r);
  }
}

void build_garage(OccupancyGrid& grid, Rng& rng, const GenerationParams& p) {
  const double W = grid.extent_x(), H = grid.extent_y();
  const double t = p.wall_thickness;
  const int nx = std::max(1, static_cast<int>(std::round(W / p.garage_bay)));
  const int ny = std::max(1, static_cast<int>(std::round(H / p.garage_bay)));
  const double bx = W / nx, by = H / ny;
  // Interior vertical walls, one door per bay-length segment.
  for (int k = 1; k < nx; ++k) {
    const double x = k * bx;
    for (int s = 0; s < ny; ++s) {
      const double y0 = s * by, y1 = (s + 1) * by;
      const double door = uniform(rng, y0 + 0.5, y1 - 0.5 - p.door_width);
      grid.fill_box(x - t / 2, y0, x + t / 2, door);
      grid.fill_box(x - t / 2, door + p.door_width, x + t / 2, y1);
    }
  }
  for (int k = 1; k < ny; ++k) {
    const double y = k * by;
    for (int s = 0; s < nx; ++s) {
      const double x0 = s * bx, x1 = (s + 1) * bx;
      const double door = uniform(rng, x0 + 0.5, x1 - 0.5 - p.door_width);
      grid.fill_box(x0, y - t / 2, door, y + t / 2);
      grid.fill_box(door + p.door_width, y - t / 2, x1, y + t / 2);
    }
  }
  // Square pillars away from the walls.
  for (int k = 0; k < p.garage_pillars; ++k) {
    const int bi = static_cast<int>(uniform(rng, 0.0, nx - 1e-9));
    const int bj = static_cast<int>(uniform(rng, 0.0, ny - 1e-9));
    const double cx = bi * bx + uniform(rng, 0.3, 0.7) * bx;
    const double cy = bj * by + uniform(rng, 0.3, 0.7) * by;
    grid.fill_box(cx - 0.25, cy - 0.25, cx + 0.25, cy + 0.25);
  }
}

void build_maze(OccupancyGrid& grid, Rng& rng, const GenerationParams& p) {
  const double cell = p.corridor_width + p.wall_thickness;
  const int nx = std::max(1, static_cast<int>(std::floor(grid.extent_x() / cell)));
  const int ny = std::max(1, static_cast<int>(std::floor(grid.extent_y() / cell)));
  const double cx = grid.extent_x() / nx, cy = grid.extent_y() / ny;
  // open_e[j][i]: passage between (i, j) and (i + 1, j); open_n similarly.
  std::vector<std::uint8_t> open_e(static_cast<std::size_t>(nx * ny), 0);
  std::vector<std::uint8_t> open_n(static_cast<std::size_t>(nx * ny), 0);
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(nx * ny), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const int c = stack.back();
    const int i = c % nx, j = c / nx;
    int options[4];
    int n = 0;
    if (i > 0 && !seen[c - 1]) options[n++] = 0;
    if (i + 1 < nx && !seen[c + 1]) options[n++] = 1;
    if (j > 0 && !seen[c - nx]) options[n++] = 2;
    if (j + 1 < ny && !seen[c + nx]) options[n++] = 3;
    if (n == 0) {
      stack.pop_back();
      continue;
    }
    const int pick = options[static_cast<int>(uniform(rng, 0.0, n - 1e-9))];
    int next = c;
    switch (pick) {
      case 0: next = c - 1; open_e[next] = 1; break;
      case 1: next = c + 1; open_e[c] = 1; break;
      case 2: next = c - nx; open_n[next] = 1; break;
      default: next = c + nx; open_n[c] = 1; break;
    }
    seen[next] = 1;
    stack.push_back(next);
  }
  // Knock out some extra walls so the maze has loops.
  for (std::size_t k = 0; k < open_e.size(); ++k) {
    if (uniform(rng, 0.0, 1.0) < p.maze_loop_fraction) open_e[k] = 1;
    if (uniform(rng, 0.0, 1.0) < p.maze_loop_fraction) open_n[k] = 1;
  }
  const double t = p.wall_thickness;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int c = j * nx + i;
      if (i + 1 < nx && !open_e[c]) {
        const double x = (i + 1) * cx;
        grid.fill_box(x - t / 2, j * cy - t / 2, x + t / 2, (j + 1) * cy + t / 2);
      }
      if (j + 1 < ny && !open_n[c]) {
        const double y = (j + 1) * cy;
        grid.fill_box(i * cx - t / 2, y - t / 2, (i + 1) * cx + t / 2, y + t / 2);
      }
    }
}

void build_campus(OccupancyGrid& grid, Rng& rng, const GenerationParams& p) {
  std::vector<Eigen::Vector4d> boxes;
  const double W = grid.extent_x(), H = grid.extent_y();
  const double gap = 2.0 * p.corridor_width;
  for (int k = 0, tries = 0; k < p.campus_buildings && tries < 200; ++tries) {
    const double w = uniform(rng, 2.5, 7.0), h = uniform(rng, 2.5, 7.0);
    const double x0 = uniform(rng, 1.0, W - 1.0 - w), y0 = uniform(rng, 1.0, H - 1.0 - h);
    const Eigen::Vector4d b(x0, y0, x0 + w, y0 + h);
    bool ok = true;
    for (const auto& o : boxes)
      if (b[0] < o[2] + gap && o[0] < b[2] + gap && b[1] < o[3] + gap && o[1] < b[3] + gap) {
        ok = false;
        break;
      }
    if (!ok) continue;
    boxes.push_back(b);
    grid.fill_box(b[0], b[1], b[2], b[3]);
    ++k;
  }
  scatter_trees(grid, rng, p.campus_tree_density, p, 0.5);
}

}  // namespace

OccupancyGrid generate_grid(Archetype archetype, std::uint64_t seed,
                            const GenerationParams& params) {
  params.validate();
  const int w = static_cast<int>(std::round(params.width_m / params.resolution));
  const int h = static_cast<int>(std::round(params.height_m / params.resolution));
  OccupancyGrid grid(w, h, params.resolution);
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(archetype) + 1));
  switch (archetype) {
    case Archetype::kForest: scatter_trees(grid, rng, params.forest_density, params, 0.5); break;
    case Archetype::kGarage: build_garage(grid, rng, params); break;
    case Archetype::kIndoor: build_maze(grid, rng, params); break;
    case Archetype::kCampus: build_campus(grid, rng, params); break;
  }
  grid.close_border();
  return grid;
}

TaskSampler::TaskSampler(const OccupancyGrid& grid, const GenerationParams& params)
    : grid_(&grid), params_(params) {
  if (params.max_detour > 0.0) {
    blocked_.assign(grid.cells.size(), 0);
    for (int j = 0; j < grid.height; ++j)
      for (int i = 0; i < grid.width; ++i)
        blocked_[grid.index(i, j)] = in_collision(grid, grid.cell_center(i, j), params.robot_radius);
  }
}

double TaskSampler::path_length(const Vec2& from, const Vec2& to, double limit) const {
  const OccupancyGrid& g = *grid_;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const Vec2 c0 = g.to_grid(from), c1 = g.to_grid(to);
  const int si = static_cast<int>(std::floor(c0.x())), sj = static_cast<int>(std::floor(c0.y()));
  const int ti = static_cast<int>(std::floor(c1.x())), tj = static_cast<int>(std::floor(c1.y()));
  auto inside = [&](int i, int j) { return i >= 0 && j >= 0 && i < g.width && j < g.height; };
  if (!inside(si, sj) || !inside(ti, tj)) return kInf;
  auto blocked = [&](int i, int j) {
    return blocked_.empty() ? g.occupied(i, j) : blocked_[g.index(i, j)] != 0;
  };
  if (blocked(ti, tj)) return kInf;
  const double h = g.resolution, d = h * std::numbers::sqrt2;
  auto octile = [&](int i, int j) {
    const int dx = std::abs(i - ti), dy = std::abs(j - tj);
    return h * std::abs(dx - dy) + d * std::min(dx, dy);
  };
  std::vector<double> dist(g.cells.size(), kInf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
  const std::size_t target = g.index(ti, tj);
  dist[g.index(si, sj)] = 0.0;
  open.emplace(octile(si, sj), g.index(si, sj));
  while (!open.empty()) {
    const auto [fu, u] = open.top();
    open.pop();
    if (u == target) return dist[u];
    const int ui = static_cast<int>(u % static_cast<std::size_t>(g.width));
    const int uj = static_cast<int>(u / static_cast<std::size_t>(g.width));
    if (fu > dist[u] + octile(ui, uj)) continue;
    for (int dj = -1; dj <= 1; ++dj)
      for (int di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0) continue;
        const int vi = ui + di, vj = uj + dj;
        if (!inside(vi, vj) || blocked(vi, vj)) continue;
        // Diagonal moves must not cut a blocked corner.
        if (di != 0 && dj != 0 && (blocked(ui + di, uj) || blocked(ui, uj + dj))) continue;
        const double dv = dist[u] + (di != 0 && dj != 0 ? d : h);
        const std::size_t v = g.index(vi, vj);
        if (dv >= dist[v] || dv + octile(vi, vj) > limit) continue;
        dist[v] = dv;
        open.emplace(dv + octile(vi, vj), v);
      }
  }
  return kInf;
}

void TaskSampler::sample(std::uint64_t seed, Pose2& start, Vec2& goal, int max_attempts) const {
  constexpr int kGoalDraws = 16;
  const OccupancyGrid& grid = *grid_;
  Rng rng(derive_seed(seed, 0x7a5c));
  const double W = grid.extent_x(), H = grid.extent_y();
  const bool detour = params_.max_detour > 0.0;
  for (int a = 0; a < max_attempts; ++a) {
    const Vec2 s = grid.origin.transform(Vec2(uniform(rng, 0.0, W), uniform(rng, 0.0, H)));
    const double offset = uniform(rng, -params_.max_goal_bearing, params_.max_goal_bearing);
    for (int k = 0; k < (detour ? kGoalDraws : 1); ++k) {
      const double dist = uniform(rng, params_.goal_min_distance, params_.goal_max_distance);
      const double bearing = uniform(rng, -std::numbers::pi, std::numbers::pi);
      const Vec2 g = s + dist * Vec2(std::cos(bearing), std::sin(bearing));
      if (in_collision(grid, s, params_.robot_radius)) break;
      if (in_collision(grid, g, params_.robot_radius)) continue;
      if (detour && !(path_length(s, g, params_.max_detour * dist) <= params_.max_detour * dist))
        continue;
      start = Pose2(s.x(), s.y(), bearing - offset);
      goal = g;
      return;
    }
  }
  throw GenerationFailed("no valid start/goal pair after " + std::to_string(max_attempts) +
                         " samples");
}

void sample_task(const OccupancyGrid& grid, std::uint64_t seed, const GenerationParams& params,
                 Pose2& start, Vec2& goal, int max_attempts) {
  TaskSampler(grid, params).sample(seed, start, goal, max_attempts);
}

Scenario generate(Archetype archetype, std::uint64_t seed, const GenerationParams& params) {
  Scenario sc;
  sc.archetype = archetype;
  sc.seed = seed;
  auto grid = std::make_shared<OccupancyGrid>(generate_grid(archetype, seed, params));
  sample_task(*grid, seed, params, sc.start, sc.goal);
  sc.grid = std::move(grid);
  return sc;
}

namespace {

double cast_one(const OccupancyGrid& grid, const Vec2& g0, double angle, double max_cells) {
  const double dx = std::cos(angle), dy = std::sin(angle);
  int ci = static_cast<int>(std::floor(g0.x()));
  int cj = static_cast<int>(std::floor(g0.y()));
  const int step_i = dx > 0 ? 1 : -1, step_j = dy > 0 ? 1 : -1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double delta_i = dx != 0.0 ? std::abs(1.0 / dx) : kInf;
  const double delta_j = dy != 0.0 ? std::abs(1.0 / dy) : kInf;
  double t_i = dx > 0 ? (ci + 1 - g0.x()) * delta_i
                      : (dx < 0 ? (g0.x() - ci) * delta_i : kInf);
  double t_j = dy > 0 ? (cj + 1 - g0.y()) * delta_j
                      : (dy < 0 ? (g0.y() - cj) * delta_j : kInf);
  double t = 0.0;
  while (t < max_cells) {
    if (t_i < t_j) {
      t = t_i;
      t_i += delta_i;
      ci += step_i;
    } else {
      t = t_j;
      t_j += delta_j;
      cj += step_j;
    }
    if (t >= max_cells) break;
    if (!grid.inside(ci, cj) || grid.occupied(ci, cj)) return t;
  }
  return max_cells;
}

}  // namespace

RangeScan raycast(const OccupancyGrid& grid, const Pose2& pose, int n_beams, double fov,
                  double max_range) {
  if (n_beams < 1 || !(max_range > 0.0))
    throw std::invalid_argument("raycast: need at least one beam and positive range");
  const Vec2 g0 = grid.to_grid(pose.translation());
  const int ci = static_cast<int>(std::floor(g0.x())), cj = static_cast<int>(std::floor(g0.y()));
  if (!grid.inside(ci, cj) || grid.occupied(ci, cj))
    throw PoseInCollision("raycast: pose lies in an occupied cell");
  RangeScan scan;
  scan.fov = fov;
  scan.max_range = max_range;
  scan.beams.resize(static_cast<std::size_t>(n_beams));
  const double max_cells = max_range / grid.resolution;
  const double heading = pose.psi - grid.origin.psi;
  for (int b = 0; b < n_beams; ++b) {
    const double offset = n_beams == 1 ? 0.0 : -0.5 * fov + b * fov / (n_beams - 1);
    const double t = cast_one(grid, g0, heading + offset, max_cells);
    scan.beams[static_cast<std::size_t>(b)] =
        std::clamp(t * grid.resolution, 1e-9, max_range);
  }
  return scan;
}

bool in_collision(const OccupancyGrid& grid, const Vec2& p, double robot_radius) {
  const Vec2 g = grid.to_grid(p);
  if (!(g.x() >= 0.0 && g.y() >= 0.0 && g.x() < grid.width && g.y() < grid.height)) return true;
  const double rc = robot_radius / grid.resolution;
  const int i0 = std::max(0, static_cast<int>(std::floor(g.x() - rc - 0.5)));
  const int i1 = std::min(grid.width - 1, static_cast<int>(std::ceil(g.x() + rc)));
  const int j0 = std::max(0, static_cast<int>(std::floor(g.y() - rc - 0.5)));
  const int j1 = std::min(grid.height - 1, static_cast<int>(std::ceil(g.y() + rc)));
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      if (!grid.occupied(i, j)) continue;
      const double dx = i + 0.5 - g.x(), dy = j + 0.5 - g.y();
      if (dx * dx + dy * dy < rc * rc) return true;
    }
  return false;
}

bool in_collision(const OccupancyGrid& grid, const Pose2& pose, double robot_radius) {
  return in_collision(grid, pose.translation(), robot_radius);
}

void write_grid(std::ostream& os, const OccupancyGrid& grid) {
  os.precision(17);
  os << grid.width << ' ' << grid.height << ' ' << grid.resolution << '\n';
  os << "origin " << grid.origin.x << ' ' << grid.origin.y << ' ' << grid.origin.psi << '\n';
  for (int j = 0; j < grid.height; ++j) {
    bool current = false;
    int run = 0;
    bool first = true;
    for (int i = 0; i < grid.width; ++i) {
      const bool occ = grid.occupied(i, j);
      if (occ == current) {
        ++run;
        continue;
      }
      os << (first ? "" : " ") << run;
      first = false;
      current = occ;
      run = 1;
    }
    os << (first ? "" : " ") << run << '\n';
  }
}

OccupancyGrid read_grid(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("grid: missing header");
  std::istringstream header(line);
  int w = 0, h = 0;
  double res = 0.0;
  if (!(header >> w >> h >> res) || w <= 0 || h <= 0 || !(res > 0.0))
    throw FormatError("grid: bad header '" + line + "'");
  OccupancyGrid grid(w, h, res);
  const auto pos = is.tellg();
  if (std::getline(is, line) && line.rfind("origin", 0) == 0) {
    std::istringstream o(line.substr(6));
    double x, y, psi;
    if (!(o >> x >> y >> psi)) throw FormatError("grid: bad origin line");
    grid.origin = Pose2(x, y, psi);
  } else {
    is.clear();
    is.seekg(pos);
  }
  for (int j = 0; j < h; ++j) {
    if (!std::getline(is, line)) throw FormatError("grid: missing row " + std::to_string(j));
    std::istringstream row(line);
    int i = 0;
    bool occ = false;
    long run;
    while (row >> run) {
      if (run < 0 || i + run > w) throw FormatError("grid: run overflows row " + std::to_string(j));
      for (long k = 0; k < run; ++k) grid.set(i++, j, occ);
      occ = !occ;
    }
    if (!row.eof() || i != w) throw FormatError("grid: row " + std::to_string(j) + " malformed");
  }
  return grid;
}

void save_grid(const std::string& path, const OccupancyGrid& grid) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_grid(os, grid);
}

OccupancyGrid load_grid(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path);
  return read_grid(is);
}

void write_manifest(std::ostream& os, const std::vector<ManifestEntry>& entries) {
  os.precision(17);
  os << "id,seed,archetype,start_x,start_y,start_psi,goal_x,goal_y,grid_file\n";
  for (const auto& e : entries)
    os << e.id << ',' << e.seed << ',' << archetype_name(e.archetype) << ',' << e.start.x << ','
       << e.start.y << ',' << e.start.psi << ',' << e.goal.x() << ',' << e.goal.y() << ','
       << e.grid_file << '\n';
}

std::vector<ManifestEntry> read_manifest(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("id,seed,archetype", 0) != 0)
    throw FormatError("manifest: missing header");
  std::vector<ManifestEntry> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 9) throw FormatError("manifest: expected 9 fields in '" + line + "'");
    try {
      ManifestEntry e;
      e.id = std::stoi(f[0]);
      e.seed = std::stoull(f[1]);
      e.archetype = parse_archetype(f[2]);
      e.start = Pose2(std::stod(f[3]), std::stod(f[4]), std::stod(f[5]));
      e.goal = Vec2(std::stod(f[6]), std::stod(f[7]));
      e.grid_file = f[8];
      out.push_back(std::move(e));
    } catch (const std::invalid_argument& ex) {
      throw FormatError(std::string("manifest: ") + ex.what());
    }
  }
  return out;
}

}  // namespace kinplan
