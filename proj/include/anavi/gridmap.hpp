#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anavi/rng.hpp"

namespace anavi {

// Continuous position in the map frame, in meters.
struct Pose2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Pose2&, const Pose2&) = default;
};

double distance(const Pose2& a, const Pose2& b);

struct Cell {
  int x = 0;
  int y = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

struct Material {
  int code = 0;
  std::string name;
  double absorption = 0.0;
};

// Material codes and their absorption coefficients. Code 0 is air.
class MaterialTable {
 public:
  MaterialTable() = default;
  explicit MaterialTable(std::vector<Material> entries);

  const std::vector<Material>& entries() const { return entries_; }
  bool contains(int code) const;
  double absorption(int code) const;
  const Material& at(int code) const;

  // Copy with every absorption replaced by f(code, absorption).
  template <typename F>
  MaterialTable transformed(F&& f) const {
    std::vector<Material> out = entries_;
    for (auto& m : out) {
      if (m.code != 0) m.absorption = f(m.code, m.absorption);
    }
    return MaterialTable(std::move(out));
  }

 private:
  std::vector<Material> entries_;
  // Dense lookup by code; -1 for codes not in the table.
  std::vector<int> index_;
};

// Occupancy grid whose cells carry material codes (0 = traversable air).
// Cell (x, y) covers [x*cs, (x+1)*cs) x [y*cs, (y+1)*cs); row y = 0 is the
// first row of the file.
class GridMap {
 public:
  GridMap() = default;
  GridMap(std::string id, int width, int height, double cell_size,
          std::vector<int> cells);

  const std::string& id() const { return id_; }
  int width() const { return width_; }
  int height() const { return height_; }
  double cell_size() const { return cell_size_; }
  double extent_x() const { return width_ * cell_size_; }
  double extent_y() const { return height_ * cell_size_; }
  const std::vector<int>& cells() const { return cells_; }

  bool in_bounds(const Pose2& p) const;
  bool in_bounds(const Cell& c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_;
  }
  int index(const Cell& c) const { return c.y * width_ + c.x; }
  Cell cell_of_index(int i) const { return {i % width_, i / width_}; }
  int code(const Cell& c) const { return cells_[index(c)]; }
  bool free(const Cell& c) const { return in_bounds(c) && code(c) == 0; }

  // floor(coord / cell_size); a pose on the max edge clamps to the last cell.
  // Throws UsageError for out-of-bounds poses.
  Cell cell_at(const Pose2& p) const;
  Pose2 center(const Cell& c) const;

  std::size_t traversable_count() const;
  std::vector<Cell> traversable_cells() const;

  // Validates the invariants against a material table; throws DataError.
  void validate(const MaterialTable& materials) const;

 private:
  std::string id_;
  int width_ = 0;
  int height_ = 0;
  double cell_size_ = 0.25;
  std::vector<int> cells_;
};

struct WorldMap {
  GridMap grid;
  MaterialTable materials;
};

WorldMap parse_map(const std::string& json_text,
                   const std::string& origin = "<memory>");
WorldMap load_map(const std::filesystem::path& path);
std::string map_to_json(const WorldMap& world);
void save_map(const std::filesystem::path& path, const WorldMap& world);

// Loads every *.json map in a directory, sorted by file name. Run records
// (run.json, *.run.json) are skipped.
std::vector<WorldMap> load_map_dir(const std::filesystem::path& dir);

bool is_traversable(const GridMap& map, const Pose2& p);

// True iff the segment a-b only crosses air cells.
bool line_of_sight(const GridMap& map, const Pose2& a, const Pose2& b);

// Calls visit(cell) for each cell the segment a-b passes through, in order,
// until visit returns false. Returns false if stopped early.
template <typename Visit>
bool traverse_segment(const GridMap& map, const Pose2& a, const Pose2& b,
                      Visit&& visit);

struct SamplingConfig {
  double source_radius = 20.0;
  double listener_radius = 10.0;
  int grid_points = 100;
  int max_retries = 1000;
};

struct PosePair {
  Pose2 source;
  Pose2 listener;
};

// Lattice of ~grid_points cell-center points covering the map.
std::vector<Pose2> sampling_centers(const GridMap& map, int grid_points);

// Source within source_radius of a random lattice center, listener within
// listener_radius of the source; both drawn uniformly from free cell centers.
// Throws DataError when retries are exhausted.
PosePair sample_pair(const GridMap& map, Rng& rng,
                     const SamplingConfig& cfg = {});

}  // namespace anavi

#include "anavi/detail/traverse.hpp"
