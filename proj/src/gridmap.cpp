#include "anavi/gridmap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "anavi/error.hpp"

namespace anavi {

using nlohmann::json;

double distance(const Pose2& a, const Pose2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

MaterialTable::MaterialTable(std::vector<Material> entries)
    : entries_(std::move(entries)) {
  bool has_air = false;
  for (const auto& m : entries_) {
    if (m.code < 0) {
      throw DataError("material code must be non-negative, got " +
                      std::to_string(m.code));
    }
    if (!(m.absorption >= 0.0 && m.absorption <= 1.0)) {
      throw DataError("material '" + m.name + "' absorption " +
                      std::to_string(m.absorption) + " outside [0,1]");
    }
    if (m.code == 0) {
      has_air = true;
      if (m.absorption != 0.0) {
        throw DataError("material code 0 is air and must have absorption 0");
      }
    }
  }
  if (!has_air) entries_.insert(entries_.begin(), Material{0, "air", 0.0});
  int max_code = 0;
  for (const auto& m : entries_) max_code = std::max(max_code, m.code);
  index_.assign(static_cast<std::size_t>(max_code) + 1, -1);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& slot = index_[static_cast<std::size_t>(entries_[i].code)];
    if (slot != -1) {
      throw DataError("duplicate material code " +
                      std::to_string(entries_[i].code));
    }
    slot = static_cast<int>(i);
  }
}

bool MaterialTable::contains(int code) const {
  return code >= 0 && code < static_cast<int>(index_.size()) &&
         index_[static_cast<std::size_t>(code)] >= 0;
}

const Material& MaterialTable::at(int code) const {
  if (!contains(code)) {
    throw DataError("unknown material code " + std::to_string(code));
  }
  return entries_[static_cast<std::size_t>(index_[static_cast<std::size_t>(code)])];
}

double MaterialTable::absorption(int code) const { return at(code).absorption; }

GridMap::GridMap(std::string id, int width, int height, double cell_size,
                 std::vector<int> cells)
    : id_(std::move(id)),
      width_(width),
      height_(height),
      cell_size_(cell_size),
      cells_(std::move(cells)) {
  if (width_ <= 0 || height_ <= 0) throw DataError("empty map");
  if (!(cell_size_ > 0.0)) throw DataError("cell_size must be positive");
  if (cells_.size() != static_cast<std::size_t>(width_) * height_) {
    throw DataError("cell count " + std::to_string(cells_.size()) +
                    " does not match width*height");
  }
}

bool GridMap::in_bounds(const Pose2& p) const {
  return p.x >= 0.0 && p.y >= 0.0 && p.x <= extent_x() && p.y <= extent_y();
}

Cell GridMap::cell_at(const Pose2& p) const {
  if (!in_bounds(p)) {
    std::ostringstream os;
    os << "pose (" << p.x << ", " << p.y << ") outside map '" << id_ << "'";
    throw UsageError(os.str());
  }
  const int cx = std::min(static_cast<int>(std::floor(p.x / cell_size_)),
                          width_ - 1);
  const int cy = std::min(static_cast<int>(std::floor(p.y / cell_size_)),
                          height_ - 1);
  return {cx, cy};
}

Pose2 GridMap::center(const Cell& c) const {
  return {(c.x + 0.5) * cell_size_, (c.y + 0.5) * cell_size_};
}

std::size_t GridMap::traversable_count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), 0));
}

std::vector<Cell> GridMap::traversable_cells() const {
  std::vector<Cell> out;
  for (int i = 0; i < static_cast<int>(cells_.size()); ++i) {
    if (cells_[static_cast<std::size_t>(i)] == 0) out.push_back(cell_of_index(i));
  }
  return out;
}

void GridMap::validate(const MaterialTable& materials) const {
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (!materials.contains(cells_[i])) {
      throw DataError("map '" + id_ + "': unknown material code " +
                      std::to_string(cells_[i]) + " at cell (" +
                      std::to_string(i % width_) + ", " +
                      std::to_string(i / width_) + ")");
    }
  }
  if (traversable_count() == 0) {
    throw DataError("map '" + id_ + "' has no traversable cell");
  }
}

namespace {

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(),
                                         text.begin() + static_cast<long>(offset),
                                         '\n'));
}

template <typename T>
T field(const json& j, const char* name, const std::string& origin) {
  if (!j.contains(name)) {
    throw DataError(origin + ": missing field '" + name + "'");
  }
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw DataError(origin + ": field '" + name + "': " + e.what());
  }
}

}  // namespace

WorldMap parse_map(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(origin + ": line " +
                    std::to_string(line_of_offset(text, e.byte)) +
                    ": JSON parse error: " + e.what());
  }
  if (!j.is_object()) throw DataError(origin + ": map must be a JSON object");

  const auto id = field<std::string>(j, "id", origin);
  const auto cell_size =
      j.contains("cell_size") ? field<double>(j, "cell_size", origin) : 0.25;
  const auto width = field<int>(j, "width", origin);
  const auto height = field<int>(j, "height", origin);
  if (width <= 0 || height <= 0) throw DataError(origin + ": empty map");

  std::vector<Material> materials;
  if (j.contains("materials")) {
    const auto& arr = j.at("materials");
    if (!arr.is_array()) throw DataError(origin + ": 'materials' must be an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = origin + ": materials[" + std::to_string(i) + "]";
      materials.push_back({field<int>(arr[i], "code", where),
                           field<std::string>(arr[i], "name", where),
                           field<double>(arr[i], "absorption", where)});
    }
  }
  MaterialTable table(std::move(materials));

  std::vector<int> cells;
  cells.reserve(static_cast<std::size_t>(width) * height);
  if (j.contains("rows")) {
    const auto rows = field<std::vector<std::string>>(j, "rows", origin);
    if (static_cast<int>(rows.size()) != height) {
      throw DataError(origin + ": 'rows' has " + std::to_string(rows.size()) +
                      " entries, expected height " + std::to_string(height));
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<int>(rows[r].size()) != width) {
        throw DataError(origin + ": rows[" + std::to_string(r) + "] has length " +
                        std::to_string(rows[r].size()) + ", expected width " +
                        std::to_string(width));
      }
      for (char ch : rows[r]) {
        if (ch < '0' || ch > '9') {
          throw DataError(origin + ": rows[" + std::to_string(r) +
                          "]: invalid cell character '" + std::string(1, ch) + "'");
        }
        cells.push_back(ch - '0');
      }
    }
  } else if (j.contains("cells")) {
    const auto grid = field<std::vector<std::vector<int>>>(j, "cells", origin);
    if (static_cast<int>(grid.size()) != height) {
      throw DataError(origin + ": 'cells' has " + std::to_string(grid.size()) +
                      " rows, expected height " + std::to_string(height));
    }
    for (std::size_t r = 0; r < grid.size(); ++r) {
      if (static_cast<int>(grid[r].size()) != width) {
        throw DataError(origin + ": cells[" + std::to_string(r) +
                        "] has wrong length");
      }
      cells.insert(cells.end(), grid[r].begin(), grid[r].end());
    }
  } else {
    throw DataError(origin + ": map needs 'rows' or 'cells'");
  }

  WorldMap world{GridMap(id, width, height, cell_size, std::move(cells)),
                 std::move(table)};
  try {
    world.grid.validate(world.materials);
  } catch (const DataError& e) {
    throw DataError(origin + ": " + e.what());
  }
  return world;
}

WorldMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open map file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_map(buf.str(), path.string());
}

std::string map_to_json(const WorldMap& world) {
  const auto& g = world.grid;
  json j;
  j["id"] = g.id();
  j["cell_size"] = g.cell_size();
  j["width"] = g.width();
  j["height"] = g.height();
  json mats = json::array();
  bool wide = false;
  for (const auto& m : world.materials.entries()) {
    if (m.code == 0) continue;
    mats.push_back({{"code", m.code}, {"name", m.name}, {"absorption", m.absorption}});
    wide = wide || m.code > 9;
  }
  j["materials"] = mats;
  if (!wide) {
    std::vector<std::string> rows;
    for (int y = 0; y < g.height(); ++y) {
      std::string row;
      for (int x = 0; x < g.width(); ++x) {
        row.push_back(static_cast<char>('0' + g.code({x, y})));
      }
      rows.push_back(std::move(row));
    }
    j["rows"] = rows;
  } else {
    std::vector<std::vector<int>> grid;
    for (int y = 0; y < g.height(); ++y) {
      grid.emplace_back(g.cells().begin() + y * g.width(),
                        g.cells().begin() + (y + 1) * g.width());
    }
    j["cells"] = grid;
  }
  return j.dump(1) + "\n";
}

void save_map(const std::filesystem::path& path, const WorldMap& world) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write map file " + path.string());
  out << map_to_json(world);
}

std::vector<WorldMap> load_map_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("map directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    const bool run_record = name == "run.json" || name.ends_with(".run.json");
    if (e.is_regular_file() && e.path().extension() == ".json" && !run_record) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<WorldMap> maps;
  for (const auto& f : files) maps.push_back(load_map(f));
  if (maps.empty()) throw DataError("no maps in " + dir.string());
  return maps;
}

bool is_traversable(const GridMap& map, const Pose2& p) {
  return map.code(map.cell_at(p)) == 0;
}

bool line_of_sight(const GridMap& map, const Pose2& a, const Pose2& b) {
  if (!map.in_bounds(a) || !map.in_bounds(b)) {
    throw UsageError("line_of_sight: pose outside map '" + map.id() + "'");
  }
  return traverse_segment(map, a, b,
                          [&](const Cell& c) { return map.code(c) == 0; });
}

std::vector<Pose2> sampling_centers(const GridMap& map, int grid_points) {
  const int per_axis = static_cast<int>(
      std::ceil(std::sqrt(static_cast<double>(std::max(grid_points, 1)))));
  std::vector<Pose2> centers;
  centers.reserve(static_cast<std::size_t>(per_axis) * per_axis);
  for (int j = 0; j < per_axis; ++j) {
    for (int i = 0; i < per_axis; ++i) {
      const Pose2 p{(i + 0.5) / per_axis * map.extent_x(),
                    (j + 0.5) / per_axis * map.extent_y()};
      centers.push_back(map.center(map.cell_at(p)));
    }
  }
  return centers;
}

PosePair sample_pair(const GridMap& map, Rng& rng, const SamplingConfig& cfg) {
  const auto centers = sampling_centers(map, cfg.grid_points);
  const auto free_cells = map.traversable_cells();
  if (free_cells.empty()) throw DataError("map '" + map.id() + "' has no free cell");

  std::optional<Pose2> source;
  for (int i = 0; i < cfg.max_retries && !source; ++i) {
    const Pose2 c = centers[rng.below(centers.size())];
    const Pose2 p = map.center(free_cells[rng.below(free_cells.size())]);
    if (distance(p, c) <= cfg.source_radius) source = p;
  }
  if (!source) {
    throw DataError("sampling exhausted: no source found on map '" + map.id() +
                    "' after " + std::to_string(cfg.max_retries) + " retries");
  }
  std::optional<Pose2> listener;
  for (int i = 0; i < cfg.max_retries && !listener; ++i) {
    const Pose2 p = map.center(free_cells[rng.below(free_cells.size())]);
    if (distance(p, *source) <= cfg.listener_radius) listener = p;
  }
  if (!listener) {
    throw DataError("sampling exhausted: no listener found on map '" +
                    map.id() + "' after " + std::to_string(cfg.max_retries) +
                    " retries");
  }
  return {*source, *listener};
}

}  // namespace anavi
