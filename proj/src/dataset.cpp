#include "anavi/dataset.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "json.hpp"

#include "anavi/error.hpp"

namespace anavi {

using nlohmann::json;

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw UsageError("unknown split '" + name + "' (expected train|val|test)");
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Sample make_sample(const WorldMap& world, const Pose2& source,
                   const Pose2& listener, const AcousticConfig& cfg, Rng& rng,
                   int n_bins) {
  Sample s;
  s.map_id = world.grid.id();
  s.source = source;
  s.listener = listener;
  s.r = distance(source, listener);
  s.theta = bearing(source, listener);
  s.scan = scan_panorama(world, source, n_bins);
  const auto label = histogram_to_label(trace_impulse(world, source, listener, cfg, rng));
  s.y = label.y;
  s.db_max = label.db_max;
  return s;
}

std::vector<Sample> generate(const std::vector<WorldMap>& maps,
                             const GenerateOptions& opts) {
  if (opts.per_map < 1) throw UsageError("generate: per_map must be >= 1");
  opts.acoustic.validate();
  const std::size_t per_map = static_cast<std::size_t>(opts.per_map);
  const std::size_t total = maps.size() * per_map;
  std::vector<Sample> out(total);

  const auto make = [&](std::size_t index) {
    const auto& world = maps[index / per_map];
    const auto i = index % per_map;
    Rng rng(derive_seed(opts.seed ^ fnv1a(world.grid.id()), i));
    // Coincident poses have no direction; redraw them.
    for (int attempt = 0;; ++attempt) {
      const auto pair = sample_pair(world.grid, rng, opts.sampling);
      if (!(pair.source == pair.listener)) {
        out[index] = make_sample(world, pair.source, pair.listener, opts.acoustic,
                                 rng, opts.n_bins);
        return;
      }
      if (attempt >= opts.sampling.max_retries) {
        throw DataError("sampling exhausted on map '" + world.grid.id() +
                        "': source and listener always coincide");
      }
    }
  };

  const int jobs = std::max(1, opts.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < total; ++i) make(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> workers;
  for (int j = 0; j < jobs; ++j) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < total; i = next++) {
        try {
          make(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
          next = total;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::string sample_to_json(const Sample& s) {
  json j;
  j["schema_version"] = kDatasetSchemaVersion;
  j["map_id"] = s.map_id;
  j["source"] = {s.source.x, s.source.y};
  j["listener"] = {s.listener.x, s.listener.y};
  j["r"] = s.r;
  j["theta"] = s.theta;
  j["scan"] = {{"n_bins", s.scan.n_bins},
               {"max_range", s.scan.max_range},
               {"ranges", s.scan.ranges},
               {"absorptions", s.scan.absorptions}};
  j["y"] = s.y;
  j["db_max"] = s.db_max;
  return j.dump();
}

Sample sample_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed record: ") + e.what());
  }
  if (!j.is_object() || !j.contains("schema_version")) {
    throw DataError("record has no schema_version");
  }
  const int version = j.at("schema_version").get<int>();
  if (version != kDatasetSchemaVersion) {
    throw DataError("unsupported dataset schema_version " + std::to_string(version) +
                    " (expected " + std::to_string(kDatasetSchemaVersion) +
                    "); regenerate the file with `anavi gen-data`");
  }
  try {
    Sample s;
    s.map_id = j.at("map_id").get<std::string>();
    const auto src = j.at("source").get<std::vector<double>>();
    const auto lst = j.at("listener").get<std::vector<double>>();
    if (src.size() != 2 || lst.size() != 2) throw DataError("poses must have 2 coordinates");
    s.source = {src[0], src[1]};
    s.listener = {lst[0], lst[1]};
    s.r = j.at("r").get<double>();
    s.theta = j.at("theta").get<double>();
    const auto& scan = j.at("scan");
    s.scan.n_bins = scan.at("n_bins").get<int>();
    s.scan.max_range = scan.at("max_range").get<double>();
    s.scan.ranges = scan.at("ranges").get<std::vector<double>>();
    s.scan.absorptions = scan.at("absorptions").get<std::vector<double>>();
    s.scan.origin = s.source;
    s.y = j.at("y").get<double>();
    s.db_max = j.at("db_max").get<double>();
    if (static_cast<int>(s.scan.ranges.size()) != s.scan.n_bins ||
        static_cast<int>(s.scan.absorptions.size()) != s.scan.n_bins) {
      throw DataError("scan arrays do not match n_bins");
    }
    if (!(s.y >= 0.0 && s.y <= 1.0)) throw DataError("label y outside [0,1]");
    if (!(s.r > 0.0 && s.r <= kMaxListenerRange)) throw DataError("r outside (0,10]");
    return s;
  } catch (const json::exception& e) {
    throw DataError(std::string("bad record field: ") + e.what());
  }
}

void write_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset " + path.string());
  for (const auto& s : samples) out << sample_to_json(s) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

std::vector<Sample> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::vector<Sample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(sample_from_json(line));
    } catch (const DataError& e) {
      throw DataError(path.string() + ": line " + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return out;
}

namespace {

json acoustic_to_json(const AcousticConfig& c) {
  return {{"n_rays", c.n_rays},
          {"max_bounces", c.max_bounces},
          {"energy_floor", c.energy_floor},
          {"listener_radius", c.listener_radius},
          {"air_density", c.air_density},
          {"sound_speed", c.sound_speed},
          {"bin_width", c.bin_width},
          {"max_time", c.max_time},
          {"source_intensity", AcousticConfig::source_intensity}};
}

AcousticConfig acoustic_from_json(const json& j) {
  AcousticConfig c;
  c.n_rays = j.at("n_rays").get<int>();
  c.max_bounces = j.at("max_bounces").get<int>();
  c.energy_floor = j.at("energy_floor").get<double>();
  c.listener_radius = j.at("listener_radius").get<double>();
  c.air_density = j.at("air_density").get<double>();
  c.sound_speed = j.at("sound_speed").get<double>();
  c.bin_width = j.at("bin_width").get<double>();
  c.max_time = j.at("max_time").get<double>();
  return c;
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  json j;
  j["schema_version"] = kDatasetSchemaVersion;
  j["split"] = split_name(m.split);
  j["map_ids"] = m.map_ids;
  j["samples_per_map"] = m.samples_per_map;
  j["seed"] = m.seed;
  j["acoustic_cfg"] = acoustic_to_json(m.acoustic_cfg);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  try {
    const json j = json::parse(in);
    DatasetManifest m;
    m.split = parse_split(j.at("split").get<std::string>());
    m.map_ids = j.at("map_ids").get<std::vector<std::string>>();
    m.samples_per_map = j.at("samples_per_map").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.acoustic_cfg = acoustic_from_json(j.at("acoustic_cfg"));
    if (m.samples_per_map <= 0) throw DataError("samples_per_map must be > 0");
    return m;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::filesystem::path manifest_path_for(const std::filesystem::path& dataset) {
  auto p = dataset;
  p.replace_extension(".manifest.json");
  return p;
}

void check_split_hygiene(const std::vector<DatasetManifest>& manifests) {
  std::map<std::string, Split> owner;
  for (const auto& m : manifests) {
    for (const auto& id : m.map_ids) {
      const auto [it, inserted] = owner.emplace(id, m.split);
      if (!inserted && it->second != m.split) {
        throw DataError("map '" + id + "' appears in both " + split_name(it->second) +
                        " and " + split_name(m.split) + " splits");
      }
    }
  }
}

}  // namespace anavi
