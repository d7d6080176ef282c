#pragma once

#include <cmath>
#include <limits>

namespace anavi {

template <typename Visit>
bool traverse_segment(const GridMap& map, const Pose2& a, const Pose2& b,
                      Visit&& visit) {
  const double cs = map.cell_size();
  Cell c = map.cell_at(a);
  if (!visit(c)) return false;

  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  constexpr double inf = std::numeric_limits<double>::infinity();
  const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  double t_max_x = inf, t_max_y = inf, t_delta_x = inf, t_delta_y = inf;
  if (step_x != 0) {
    const double edge = (step_x > 0 ? c.x + 1 : c.x) * cs;
    t_max_x = (edge - a.x) / dx;
    t_delta_x = cs / std::abs(dx);
  }
  if (step_y != 0) {
    const double edge = (step_y > 0 ? c.y + 1 : c.y) * cs;
    t_max_y = (edge - a.y) / dy;
    t_delta_y = cs / std::abs(dy);
  }

  // Segment parameter t runs over [0, 1]; a cell entered at t <= 1 is visited.
  constexpr double corner_eps = 1e-12;
  while (true) {
    const double t = std::min(t_max_x, t_max_y);
    if (t > 1.0) break;
    if (std::abs(t_max_x - t_max_y) <= corner_eps) {
      // Passing exactly through a corner touches both side cells.
      const Cell side_x{c.x + step_x, c.y};
      const Cell side_y{c.x, c.y + step_y};
      if (map.in_bounds(side_x) && !visit(side_x)) return false;
      if (map.in_bounds(side_y) && !visit(side_y)) return false;
      c.x += step_x;
      c.y += step_y;
      t_max_x += t_delta_x;
      t_max_y += t_delta_y;
    } else if (t_max_x < t_max_y) {
      c.x += step_x;
      t_max_x += t_delta_x;
    } else {
      c.y += step_y;
      t_max_y += t_delta_y;
    }
    if (!map.in_bounds(c)) break;
    if (!visit(c)) return false;
  }
  return true;
}

}  // namespace anavi
