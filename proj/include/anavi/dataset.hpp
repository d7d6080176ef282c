#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "anavi/acoustics.hpp"
#include "anavi/gridmap.hpp"
#include "anavi/sensing.hpp"

namespace anavi {

inline constexpr int kDatasetSchemaVersion = 1;

// One supervised record: robot (source) pose, listener pose, the listener's
// polar coordinates in the source frame, the panorama at the source, and the
// normalized max-dB label.
struct Sample {
  std::string map_id;
  Pose2 source;
  Pose2 listener;
  double r = 0.0;
  double theta = 0.0;
  PanoramaScan scan;
  double y = 0.0;
  double db_max = 0.0;

  FeatureVector features(FeatureLayout layout) const {
    return build_features(scan, r, theta, layout);
  }
};

enum class Split { train, val, test };
std::string split_name(Split s);
Split parse_split(const std::string& name);

struct DatasetManifest {
  Split split = Split::train;
  std::vector<std::string> map_ids;
  int samples_per_map = 0;
  std::uint64_t seed = 0;
  AcousticConfig acoustic_cfg;
};

struct GenerateOptions {
  int per_map = 1;
  std::uint64_t seed = 0;
  AcousticConfig acoustic;
  SamplingConfig sampling;
  int n_bins = kDefaultScanBins;
  int jobs = 1;
};

// Per-sample seeds derive from (seed, map id, index), so output is
// independent of the number of worker threads.
std::vector<Sample> generate(const std::vector<WorldMap>& maps,
                             const GenerateOptions& opts);

// One labelled sample for a given pose pair.
Sample make_sample(const WorldMap& world, const Pose2& source,
                   const Pose2& listener, const AcousticConfig& cfg, Rng& rng,
                   int n_bins = kDefaultScanBins);

std::string sample_to_json(const Sample& s);
Sample sample_from_json(const std::string& line);

void write_dataset(const std::filesystem::path& path,
                   const std::vector<Sample>& samples);
std::vector<Sample> read_dataset(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::filesystem::path& path);

// Sidecar path FILE.manifest.json for a dataset FILE.jsonl.
std::filesystem::path manifest_path_for(const std::filesystem::path& dataset);

// Throws DataError if any map id appears in more than one manifest.
void check_split_hygiene(const std::vector<DatasetManifest>& manifests);

}  // namespace anavi
