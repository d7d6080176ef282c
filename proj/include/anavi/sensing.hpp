#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "anavi/gridmap.hpp"

namespace anavi {

inline constexpr double kMaxScanRange = 12.0;  // m
inline constexpr double kMaxListenerRange = 10.0;  // m
inline constexpr int kDefaultScanBins = 64;

// 360 degree range/material scan. Bin i is centered at (i + 0.5) * 2pi/n,
// counterclockwise from +x.
struct PanoramaScan {
  int n_bins = kDefaultScanBins;
  std::vector<double> ranges;       // m, in (0, max_range]
  std::vector<double> absorptions;  // of the first material hit, 0 on no hit
  Pose2 origin;
  double bin0_angle = 0.0;
  double max_range = kMaxScanRange;

  double bin_center(int i) const;
};

enum class FeatureLayout { dirdist, pano, ego };

std::string_view layout_name(FeatureLayout layout);
FeatureLayout parse_layout(std::string_view name);
std::size_t feature_size(FeatureLayout layout, int n_bins);

struct FeatureVector {
  FeatureLayout layout = FeatureLayout::dirdist;
  std::vector<double> values;
};

struct RayHit {
  double range = 0.0;
  Cell cell;
};

// First solid cell along a ray from origin, within max_range.
std::optional<RayHit> cast_ray(const GridMap& map, const Pose2& origin,
                               double angle, double max_range);

// Direction of `to` seen from `from`, counterclockwise from +x, in [0, 2pi).
double bearing(const Pose2& from, const Pose2& to);

PanoramaScan scan_panorama(const WorldMap& world, const Pose2& origin,
                           int n_bins = kDefaultScanBins);

// First bin of the n_bins/4 window centered on direction theta.
int ego_window_start(int n_bins, double theta);

// [r/10, theta/2pi] followed by normalized ranges then absorptions (all bins
// for pano, the 90 degree window facing theta for ego).
FeatureVector build_features(const PanoramaScan& scan, double r, double theta,
                             FeatureLayout layout);

}  // namespace anavi
