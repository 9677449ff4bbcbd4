#pragma once

// Level-set extraction on a rectangular grid (marching squares).

#include <array>
#include <functional>
#include <vector>

#include "odcbf/types.hpp"

namespace odcbf {

struct Grid2 {
  double x_lo, x_hi;
  double y_lo, y_hi;
  int nx, ny;  // number of nodes per axis

  double x(int i) const { return x_lo + (x_hi - x_lo) * i / (nx - 1); }
  double y(int j) const { return y_lo + (y_hi - y_lo) * j / (ny - 1); }
  double dx() const { return (x_hi - x_lo) / (nx - 1); }
  double dy() const { return (y_hi - y_lo) / (ny - 1); }
};

struct Segment {
  std::array<double, 2> a;
  std::array<double, 2> b;
};

// Segments of {f = level}. Saddle cells are split by the cell-centre value.
inline std::vector<Segment> level_set(const std::function<double(double, double)>& f,
                                      const Grid2& grid, double level) {
  if (grid.nx < 2 || grid.ny < 2) throw ParameterError("grid needs at least 2 nodes per axis");
  std::vector<double> v(static_cast<std::size_t>(grid.nx * grid.ny));
  auto at = [&](int i, int j) -> double& { return v[static_cast<std::size_t>(j * grid.nx + i)]; };
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) at(i, j) = f(grid.x(i), grid.y(j)) - level;
  }

  std::vector<Segment> out;
  for (int j = 0; j + 1 < grid.ny; ++j) {
    for (int i = 0; i + 1 < grid.nx; ++i) {
      // Corners counter-clockwise from (i, j).
      const std::array<double, 4> val = {at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)};
      const std::array<std::array<double, 2>, 4> pos = {{{grid.x(i), grid.y(j)},
                                                         {grid.x(i + 1), grid.y(j)},
                                                         {grid.x(i + 1), grid.y(j + 1)},
                                                         {grid.x(i), grid.y(j + 1)}}};
      int mask = 0;
      for (int k = 0; k < 4; ++k) {
        if (val[k] >= 0.0) mask |= 1 << k;
      }
      if (mask == 0 || mask == 15) continue;
      auto edge_point = [&](int e) {
        const int a = e, b = (e + 1) % 4;
        const double t = val[a] / (val[a] - val[b]);
        return std::array<double, 2>{pos[a][0] + t * (pos[b][0] - pos[a][0]),
                                     pos[a][1] + t * (pos[b][1] - pos[a][1])};
      };
      std::vector<int> crossed;
      for (int e = 0; e < 4; ++e) {
        if (((mask >> e) & 1) != ((mask >> ((e + 1) % 4)) & 1)) crossed.push_back(e);
      }
      if (crossed.size() == 2) {
        out.push_back({edge_point(crossed[0]), edge_point(crossed[1])});
      } else {
        const double centre = 0.25 * (val[0] + val[1] + val[2] + val[3]);
        // If corner 0 and the centre share a sign, corners 0 and 2 connect
        // through the cell and corners 1 and 3 are cut off.
        const bool zero_pos = (mask & 1) != 0;
        if (zero_pos == (centre >= 0.0)) {
          out.push_back({edge_point(0), edge_point(1)});
          out.push_back({edge_point(2), edge_point(3)});
        } else {
          out.push_back({edge_point(3), edge_point(0)});
          out.push_back({edge_point(1), edge_point(2)});
        }
      }
    }
  }
  return out;
}

}  // namespace odcbf
