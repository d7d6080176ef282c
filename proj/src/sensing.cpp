#include "anavi/sensing.hpp"

#include <cmath>
#include <limits>

#include "anavi/error.hpp"

namespace anavi {

double PanoramaScan::bin_center(int i) const {
  return bin0_angle + (i + 0.5) * 2.0 * M_PI / n_bins;
}

std::string_view layout_name(FeatureLayout layout) {
  switch (layout) {
    case FeatureLayout::dirdist: return "dirdist";
    case FeatureLayout::pano: return "pano";
    case FeatureLayout::ego: return "ego";
  }
  return "?";
}

FeatureLayout parse_layout(std::string_view name) {
  if (name == "dirdist") return FeatureLayout::dirdist;
  if (name == "pano") return FeatureLayout::pano;
  if (name == "ego") return FeatureLayout::ego;
  throw UsageError("unknown feature layout '" + std::string(name) + "'");
}

std::size_t feature_size(FeatureLayout layout, int n_bins) {
  switch (layout) {
    case FeatureLayout::dirdist: return 2;
    case FeatureLayout::pano: return 2 + 2 * static_cast<std::size_t>(n_bins);
    case FeatureLayout::ego: return 2 + 2 * static_cast<std::size_t>(n_bins / 4);
  }
  return 0;
}

std::optional<RayHit> cast_ray(const GridMap& map, const Pose2& origin,
                               double angle, double max_range) {
  const double cs = map.cell_size();
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  Cell c = map.cell_at(origin);
  if (map.code(c) != 0) return RayHit{0.0, c};

  constexpr double inf = std::numeric_limits<double>::infinity();
  const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  double t_max_x = step_x == 0 ? inf : (((step_x > 0 ? c.x + 1 : c.x) * cs) - origin.x) / dx;
  double t_max_y = step_y == 0 ? inf : (((step_y > 0 ? c.y + 1 : c.y) * cs) - origin.y) / dy;
  const double t_delta_x = step_x == 0 ? inf : cs / std::abs(dx);
  const double t_delta_y = step_y == 0 ? inf : cs / std::abs(dy);

  while (true) {
    double t;
    if (t_max_x < t_max_y) {
      t = t_max_x;
      c.x += step_x;
      t_max_x += t_delta_x;
    } else {
      t = t_max_y;
      c.y += step_y;
      t_max_y += t_delta_y;
    }
    if (t > max_range || !map.in_bounds(c)) return std::nullopt;
    if (map.code(c) != 0) return RayHit{t, c};
  }
}

double bearing(const Pose2& from, const Pose2& to) {
  double theta = std::atan2(to.y - from.y, to.x - from.x);
  if (theta < 0.0) theta += 2.0 * M_PI;
  // atan2 of a tiny negative y can round up to exactly 2pi.
  if (theta >= 2.0 * M_PI) theta = 0.0;
  return theta;
}

PanoramaScan scan_panorama(const WorldMap& world, const Pose2& origin, int n_bins) {
  if (n_bins < 4 || n_bins % 4 != 0) {
    throw UsageError("scan_panorama: n_bins must be a positive multiple of 4");
  }
  if (!world.grid.in_bounds(origin) || !is_traversable(world.grid, origin)) {
    throw UsageError("scan_panorama: origin is not traversable");
  }
  PanoramaScan scan;
  scan.n_bins = n_bins;
  scan.origin = origin;
  scan.ranges.resize(static_cast<std::size_t>(n_bins));
  scan.absorptions.resize(static_cast<std::size_t>(n_bins));
  for (int i = 0; i < n_bins; ++i) {
    const auto hit = cast_ray(world.grid, origin, scan.bin_center(i), scan.max_range);
    const auto k = static_cast<std::size_t>(i);
    if (hit) {
      scan.ranges[k] = hit->range;
      scan.absorptions[k] = world.materials.absorption(world.grid.code(hit->cell));
    } else {
      scan.ranges[k] = scan.max_range;
      scan.absorptions[k] = 0.0;
    }
  }
  return scan;
}

int ego_window_start(int n_bins, double theta) {
  const double bin = 2.0 * M_PI / n_bins;
  const int nearest_edge = static_cast<int>(std::floor(theta / bin + 0.5));
  const int start = nearest_edge - n_bins / 8;
  return ((start % n_bins) + n_bins) % n_bins;
}

FeatureVector build_features(const PanoramaScan& scan, double r, double theta,
                             FeatureLayout layout) {
  if (!(r > 0.0 && r <= kMaxListenerRange)) {
    throw UsageError("build_features: r must be in (0, 10]");
  }
  if (!(theta >= 0.0 && theta < 2.0 * M_PI)) {
    throw UsageError("build_features: theta must be in [0, 2pi)");
  }
  FeatureVector f;
  f.layout = layout;
  f.values.reserve(feature_size(layout, scan.n_bins));
  f.values.push_back(r / kMaxListenerRange);
  f.values.push_back(theta / (2.0 * M_PI));

  const auto push_bins = [&](int first, int count) {
    for (int i = 0; i < count; ++i) {
      const auto k = static_cast<std::size_t>((first + i) % scan.n_bins);
      f.values.push_back(scan.ranges[k] / scan.max_range);
    }
    for (int i = 0; i < count; ++i) {
      const auto k = static_cast<std::size_t>((first + i) % scan.n_bins);
      f.values.push_back(scan.absorptions[k]);
    }
  };
  switch (layout) {
    case FeatureLayout::dirdist: break;
    case FeatureLayout::pano: push_bins(0, scan.n_bins); break;
    case FeatureLayout::ego:
      push_bins(ego_window_start(scan.n_bins, theta), scan.n_bins / 4);
      break;
  }
  return f;
}

}  // namespace anavi
