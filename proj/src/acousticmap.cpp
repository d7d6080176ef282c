#include "anavi/acousticmap.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "anavi/error.hpp"
#include "anavi/sensing.hpp"

namespace anavi {

using nlohmann::json;

std::string mode_name(RasterMode m) {
  return m == RasterMode::fixed_robot ? "fixed_robot" : "fixed_listener";
}

RasterMode parse_mode(const std::string& name) {
  if (name == "fixed_robot") return RasterMode::fixed_robot;
  if (name == "fixed_listener") return RasterMode::fixed_listener;
  throw UsageError("unknown raster mode '" + name + "' (expected fixed_robot|fixed_listener)");
}

std::size_t AcousticRaster::present() const {
  std::size_t n = 0;
  for (const auto& v : values) n += v.has_value();
  return n;
}

namespace {

AcousticRaster empty_raster(const WorldMap& world, RasterMode mode, const Pose2& anchor,
                            const std::string& kind) {
  const auto& g = world.grid;
  if (!is_traversable(g, anchor)) {
    throw UsageError(std::string(mode == RasterMode::fixed_robot ? "robot" : "listener") +
                     " pose is not traversable");
  }
  AcousticRaster r;
  r.map_id = g.id();
  r.mode = mode;
  r.anchor = anchor;
  r.width = g.width();
  r.height = g.height();
  r.cell_size = g.cell_size();
  r.model_kind = kind;
  r.values.assign(g.cells().size(), std::nullopt);
  return r;
}

// Free cells within the model support around the anchor.
std::vector<Cell> cells_in_support(const GridMap& g, const Pose2& anchor) {
  std::vector<Cell> out;
  for (const auto& c : g.traversable_cells()) {
    if (distance(g.center(c), anchor) <= kMaxListenerRange) out.push_back(c);
  }
  return out;
}

template <typename F>
void parallel_for(std::size_t n, int jobs, F&& body) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> workers;
  for (int j = 0; j < jobs; ++j) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

AcousticRaster fixed_robot_map(const WorldMap& world, const Pose2& robot,
                               const PredictorModel& model) {
  auto raster = empty_raster(world, RasterMode::fixed_robot, robot, kind_name(model.kind));
  const auto scan = observe(world, robot, model);
  const auto& g = world.grid;
  for (const auto& c : cells_in_support(g, robot)) {
    raster.values[static_cast<std::size_t>(g.index(c))] =
        predict_from_scan(model, scan, g.center(c));
  }
  return raster;
}

AcousticRaster fixed_listener_map(const WorldMap& world, const Pose2& listener,
                                  const PredictorModel& model, int jobs) {
  auto raster =
      empty_raster(world, RasterMode::fixed_listener, listener, kind_name(model.kind));
  const auto& g = world.grid;
  const auto cells = cells_in_support(g, listener);
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    const auto scan = observe(world, g.center(cells[i]), model);
    raster.values[static_cast<std::size_t>(g.index(cells[i]))] =
        predict_from_scan(model, scan, listener);
  });
  return raster;
}

AcousticRaster oracle_map(const WorldMap& world, RasterMode mode, const Pose2& anchor,
                          const AcousticConfig& cfg, std::uint64_t seed, int jobs) {
  cfg.validate();
  auto raster = empty_raster(world, mode, anchor, "oracle");
  const auto& g = world.grid;
  const auto cells = cells_in_support(g, anchor);
  parallel_for(cells.size(), jobs, [&](std::size_t i) {
    const auto idx = g.index(cells[i]);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(idx)));
    const Pose2 p = g.center(cells[i]);
    const auto h = mode == RasterMode::fixed_robot ? trace_impulse(world, anchor, p, cfg, rng)
                                                   : trace_impulse(world, p, anchor, cfg, rng);
    raster.values[static_cast<std::size_t>(idx)] = histogram_to_label(h).y;
  });
  return raster;
}

std::string raster_to_json(const AcousticRaster& r) {
  json rows = json::array();
  for (int y = 0; y < r.height; ++y) {
    json row = json::array();
    for (int x = 0; x < r.width; ++x) {
      const auto& v = r.at({x, y});
      row.push_back(v ? json(*v) : json(nullptr));
    }
    rows.push_back(std::move(row));
  }
  json j{{"map_id", r.map_id},
         {"mode", mode_name(r.mode)},
         {"anchor", {r.anchor.x, r.anchor.y}},
         {"cell_size", r.cell_size},
         {"model", r.model_kind},
         {"values", std::move(rows)}};
  return j.dump() + "\n";
}

void write_raster_json(const std::filesystem::path& path, const AcousticRaster& raster) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << raster_to_json(raster);
}

void write_raster_csv(const std::filesystem::path& path, const AcousticRaster& r) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(10);
  out << "x,y,value\n";
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      out << (x + 0.5) * r.cell_size << ',' << (y + 0.5) * r.cell_size << ',';
      if (const auto& v = r.at({x, y})) out << *v;
      out << '\n';
    }
  }
}

}  // namespace anavi
