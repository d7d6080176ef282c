#pragma once

#include <filesystem>
#include <vector>

#include "anavi/gridmap.hpp"
#include "anavi/rng.hpp"

namespace anavi {

// Energy arriving at a listener per time bin for a unit impulse at a source.
struct ImpulseHistogram {
  double bin_width = 0.001;  // seconds
  std::vector<double> bins;  // W/m^2 per bin
  long total_paths = 0;      // recorded arrivals, direct term included

  double peak() const;
  double total() const;
};

struct AcousticConfig {
  int n_rays = 4096;
  int max_bounces = 8;
  double energy_floor = 1e-9;
  double listener_radius = 0.25;  // m
  double air_density = 1.225;     // kg/m^3
  double sound_speed = 343.0;     // m/s
  double bin_width = 0.001;       // s
  double max_time = 0.2;          // s

  // Intensity at 1 m from the source; fixed so that unit distance is 120 dB.
  static constexpr double source_intensity = 1.0;

  void validate() const;
};

// Normalized max-dB label: y = db_max / 128.
struct DbLabel {
  double db_max = 0.0;
  double y = 0.0;
};

inline constexpr double kDbCeiling = 128.0;
inline constexpr double kIntensityFloor = 1e-12;
// 10^0.8, the intensity that maps to 128 dB.
inline constexpr double kIntensityCeiling = 6.309573444801933;

// Clip intensity to [1e-12, 10^0.8] and convert to dB re 1e-12 W/m^2.
DbLabel intensity_to_label(double intensity);

// Stochastic 2D specular ray tracer with a deterministic direct-path term.
// Reflections use 1/D^2 spreading; the per-captured-ray weight
// k*pi/(n_rays*listener_radius*D) makes the free-field expectation 1/D^2.
ImpulseHistogram trace_impulse(const WorldMap& world, const Pose2& source,
                               const Pose2& listener, const AcousticConfig& cfg,
                               Rng& rng);

DbLabel histogram_to_label(const ImpulseHistogram& h);

// -20 log10(r) + 120, clamped to [0, 128]. Throws UsageError for r <= 0.
DbLabel heuristic_db(double r);

// Linear loudness scaling of a normalized transfer label by an action's
// loudness at the source: returns y * source_db.
double scale_action_db(double y, double source_db);

void write_histogram_csv(const std::filesystem::path& path,
                         const ImpulseHistogram& h);

}  // namespace anavi
