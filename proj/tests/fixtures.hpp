#pragma once

#include <string>

#include "anavi/gridmap.hpp"

namespace anavi::testing {

inline std::string fixture_path(const std::string& name) {
  return std::string(ANAVI_DATA_DIR) + "/fixtures/" + name + ".json";
}

inline WorldMap fixture(const std::string& name) {
  return load_map(fixture_path(name));
}

}  // namespace anavi::testing
