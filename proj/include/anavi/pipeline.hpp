#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "anavi/metrics.hpp"
#include "anavi/predictor.hpp"

namespace anavi {

// Desk-scale end-to-end run: generated floorplans, datasets, every model,
// evaluation curves, plans and acoustic maps, all written under one
// directory and fully determined by the config.
struct ReproConfig {
  std::uint64_t seed = 7;
  int train_maps = 10;
  int val_maps = 2;
  int test_maps = 3;
  int train_per_map = 2000;
  int eval_per_map = 500;
  int epochs = 60;
  int jobs = 1;
  std::vector<ModelKind> models = {
      ModelKind::heuristic, ModelKind::dislinreg, ModelKind::dirdismlp,
      ModelKind::vis_pano,  ModelKind::vis_ego,   ModelKind::binned16,
      ModelKind::binned64,  ModelKind::binned128};
  std::vector<double> plan_lambdas = {0.0, 0.1, 1.0};
};

struct ModelScore {
  ModelKind kind = ModelKind::heuristic;
  EpsCurve curve;
  double auc = 0.0;
  int best_epoch = -1;
};

struct ReproResult {
  std::vector<ModelScore> scores;

  const ModelScore& score(ModelKind kind) const;
};

using ProgressFn = std::function<void(const std::string&)>;

ReproResult run_repro(const ReproConfig& cfg, const std::filesystem::path& out,
                      const ProgressFn& progress = {});

// Map ids and generator seeds are derived from the run seed.
std::vector<WorldMap> repro_maps(const ReproConfig& cfg);

}  // namespace anavi
