#include "kinplan/esdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace kinplan {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1D squared distance transform of a sampled function (lower envelope of
// parabolas). f and d have length n; v and z are scratch.
void dt1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  int k = 0;
  int first = -1;
  for (int q = 0; q < n; ++q)
    if (f[q] < kInf) {
      first = q;
      break;
    }
  if (first < 0) {
    std::fill(d, d + n, kInf);
    return;
  }
  v[0] = first;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = first + 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
          (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = q - v[k];
    d[q] = diff * diff + f[v[k]];
  }
}

// Squared distance (in cells) from every cell to the nearest cell where
// source(i, j) is true.
std::vector<double> squared_edt(int w, int h, const auto& source) {
  std::vector<double> grid(static_cast<std::size_t>(w) * h);
  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  for (int j = 0; j < h; ++j) {
    for (int i = 0; i < w; ++i) f[i] = source(i, j) ? 0.0 : kInf;
    dt1d(f.data(), d.data(), w, v, z);
    for (int i = 0; i < w; ++i) grid[static_cast<std::size_t>(j) * w + i] = d[i];
  }
  for (int i = 0; i < w; ++i) {
    for (int j = 0; j < h; ++j) f[j] = grid[static_cast<std::size_t>(j) * w + i];
    dt1d(f.data(), d.data(), h, v, z);
    for (int j = 0; j < h; ++j) grid[static_cast<std::size_t>(j) * w + i] = d[j];
  }
  return grid;
}

}  // namespace

EsdfGrid build_esdf(const OccupancyGrid& grid, double d_safe, double cap) {
  EsdfGrid out;
  out.width_ = grid.width;
  out.height_ = grid.height;
  out.resolution_ = grid.resolution;
  out.origin_ = grid.origin;
  out.d_safe_ = d_safe;
  const int w = grid.width, h = grid.height;
  const auto to_occ = squared_edt(w, h, [&](int i, int j) { return grid.occupied(i, j); });
  const auto to_free = squared_edt(w, h, [&](int i, int j) { return !grid.occupied(i, j); });
  out.dist_.resize(to_occ.size());
  for (int j = 0; j < h; ++j)
    for (int i = 0; i < w; ++i) {
      const std::size_t k = grid.index(i, j);
      if (grid.occupied(i, j))
        out.dist_[k] = -std::min(std::sqrt(to_free[k]) * grid.resolution, cap);
      else
        out.dist_[k] = std::min(std::sqrt(to_occ[k]) * grid.resolution, cap);
    }
  return out;
}

double EsdfGrid::cost(double d) const {
  if (d >= d_safe_) return 0.0;
  if (d >= 0.0) return (d_safe_ - d) * (d_safe_ - d);
  return d_safe_ * d_safe_ - 2.0 * d_safe_ * d;
}

double EsdfGrid::cost_derivative(double d) const {
  if (d >= d_safe_) return 0.0;
  if (d >= 0.0) return -2.0 * (d_safe_ - d);
  return -2.0 * d_safe_;
}

EsdfSample EsdfGrid::sample(const Vec2& p) const {
  EsdfSample s;
  const Vec2 g = origin_.inverse_transform(p) / resolution_ - Vec2(0.5, 0.5);
  const double max_x = width_ - 1, max_y = height_ - 1;
  double gx = g.x(), gy = g.y();
  bool clamp_x = false, clamp_y = false;
  if (gx < 0.0 || gx > max_x) {
    gx = std::clamp(gx, 0.0, max_x);
    clamp_x = true;
  }
  if (gy < 0.0 || gy > max_y) {
    gy = std::clamp(gy, 0.0, max_y);
    clamp_y = true;
  }
  s.clamped = clamp_x || clamp_y;
  const int i0 = std::min(static_cast<int>(std::floor(gx)), std::max(width_ - 2, 0));
  const int j0 = std::min(static_cast<int>(std::floor(gy)), std::max(height_ - 2, 0));
  const int i1 = std::min(i0 + 1, width_ - 1), j1 = std::min(j0 + 1, height_ - 1);
  const double tx = gx - i0, ty = gy - j0;
  const double d00 = at(i0, j0), d10 = at(i1, j0), d01 = at(i0, j1), d11 = at(i1, j1);
  s.distance = (1 - tx) * (1 - ty) * d00 + tx * (1 - ty) * d10 + (1 - tx) * ty * d01 +
               tx * ty * d11;
  // Gradient of the bilinear field in grid-cell units.
  Vec2 dg((1 - ty) * (d10 - d00) + ty * (d11 - d01), (1 - tx) * (d01 - d00) + tx * (d11 - d10));
  if (clamp_x) dg.x() = 0.0;
  if (clamp_y) dg.y() = 0.0;
  s.cost = cost(s.distance);
  s.grad = cost_derivative(s.distance) * (origin_.rotation() * dg) / resolution_;
  return s;
}

void EsdfGrid::write_csv(std::ostream& os) const {
  os.precision(10);
  for (int j = 0; j < height_; ++j) {
    for (int i = 0; i < width_; ++i) os << (i ? "," : "") << at(i, j);
    os << '\n';
  }
}

}  // namespace kinplan
