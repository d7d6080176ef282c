#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anavi/gridmap.hpp"

namespace anavi {

struct FloorplanConfig {
  int min_size = 40;  // cells per side
  int max_size = 64;
  int min_room = 14;  // smallest room side before splitting stops
  double furniture_rate = 0.6;
};

// Materials the generator draws walls and furniture from.
MaterialTable standard_materials();

// Random indoor floorplan: rooms from recursive partitioning, door gaps in
// every partition, scattered furniture. Deterministic in seed.
WorldMap generate_floorplan(const std::string& id, std::uint64_t seed,
                            const FloorplanConfig& cfg = {});

}  // namespace anavi
