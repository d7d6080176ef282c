#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "anavi/acoustics.hpp"
#include "anavi/gridmap.hpp"
#include "anavi/predictor.hpp"

namespace anavi {

enum class RasterMode { fixed_robot, fixed_listener };

std::string mode_name(RasterMode m);
RasterMode parse_mode(const std::string& name);

// Per-cell loudness. Cells that are solid or farther than 10 m from the
// anchor hold no value.
struct AcousticRaster {
  std::string map_id;
  RasterMode mode = RasterMode::fixed_robot;
  Pose2 anchor;
  int width = 0;
  int height = 0;
  double cell_size = 0.25;
  std::string model_kind;
  std::vector<std::optional<double>> values;  // row-major, y * width + x

  const std::optional<double>& at(const Cell& c) const {
    return values[static_cast<std::size_t>(c.y * width + c.x)];
  }
  std::size_t present() const;
};

// Robot fixed at `robot`; one scan there, listener at every cell center.
AcousticRaster fixed_robot_map(const WorldMap& world, const Pose2& robot,
                               const PredictorModel& model);

// Listener fixed; the robot visits every cell center and scans there.
AcousticRaster fixed_listener_map(const WorldMap& world, const Pose2& listener,
                                  const PredictorModel& model, int jobs = 1);

// Same rasters from the ray tracer instead of a model. Each cell uses its own
// derived seed.
AcousticRaster oracle_map(const WorldMap& world, RasterMode mode, const Pose2& anchor,
                          const AcousticConfig& cfg, std::uint64_t seed, int jobs = 1);

std::string raster_to_json(const AcousticRaster& raster);
void write_raster_json(const std::filesystem::path& path, const AcousticRaster& raster);
// x,y,value rows per cell center; absent cells have an empty value.
void write_raster_csv(const std::filesystem::path& path, const AcousticRaster& raster);

}  // namespace anavi
