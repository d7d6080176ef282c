#include "anavi/pipeline.hpp"

#include <cstdio>
#include <fstream>

#include "anavi/acousticmap.hpp"
#include "anavi/dataset.hpp"
#include "anavi/error.hpp"
#include "anavi/mapgen.hpp"
#include "anavi/planner.hpp"

namespace anavi {

namespace fs = std::filesystem;

const ModelScore& ReproResult::score(ModelKind kind) const {
  for (const auto& s : scores) {
    if (s.kind == kind) return s;
  }
  throw UsageError("model " + kind_name(kind) + " was not part of the run");
}

std::vector<WorldMap> repro_maps(const ReproConfig& cfg) {
  const int n = cfg.train_maps + cfg.val_maps + cfg.test_maps;
  std::vector<WorldMap> maps;
  for (int i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "m%02d", i);
    maps.push_back(generate_floorplan(id, derive_seed(cfg.seed, static_cast<std::uint64_t>(i))));
  }
  return maps;
}

namespace {

void validate(const ReproConfig& cfg) {
  if (cfg.train_maps < 1 || cfg.val_maps < 1 || cfg.test_maps < 1) {
    throw UsageError("repro needs at least one map per split");
  }
  if (cfg.train_per_map < 2 || cfg.eval_per_map < 1) {
    throw UsageError("repro sample counts are too small");
  }
  if (cfg.epochs < 1) throw UsageError("repro needs at least one epoch");
  if (cfg.models.empty()) throw UsageError("repro needs at least one model");
}

struct SplitData {
  std::vector<WorldMap> maps;
  std::vector<Sample> samples;
};

SplitData make_split(const std::vector<WorldMap>& all, int begin, int end, Split split,
                     int per_map, const ReproConfig& cfg, const fs::path& out) {
  SplitData d;
  d.maps.assign(all.begin() + begin, all.begin() + end);
  const auto map_dir = out / "maps" / split_name(split);
  fs::create_directories(map_dir);
  DatasetManifest m;
  m.split = split;
  m.samples_per_map = per_map;
  m.seed = cfg.seed;
  for (const auto& w : d.maps) {
    save_map(map_dir / (w.grid.id() + ".json"), w);
    m.map_ids.push_back(w.grid.id());
  }
  GenerateOptions opts;
  opts.seed = cfg.seed;
  opts.per_map = per_map;
  opts.jobs = cfg.jobs;
  m.acoustic_cfg = opts.acoustic;
  d.samples = generate(d.maps, opts);
  const auto file = out / "data" / (split_name(split) + ".jsonl");
  write_dataset(file, d.samples);
  write_manifest(manifest_path_for(file), m);
  return d;
}

// Start and goal at opposite corners of the free space, one listener at
// the free cell nearest their midpoint.
PlanProblem corner_problem(const WorldMap& world) {
  const auto free = world.grid.traversable_cells();
  if (free.size() < 2) throw DataError("map " + world.grid.id() + " has no room to plan");
  Cell lo = free.front(), hi = free.front();
  for (const auto& c : free) {
    if (c.x + c.y < lo.x + lo.y) lo = c;
    if (c.x + c.y > hi.x + hi.y) hi = c;
  }
  PlanProblem p;
  p.world = &world;
  p.start = world.grid.center(lo);
  p.goal = world.grid.center(hi);
  const Pose2 mid{(p.start.x + p.goal.x) / 2, (p.start.y + p.goal.y) / 2};
  Pose2 best = p.start;
  for (const auto& c : free) {
    if (distance(world.grid.center(c), mid) < distance(best, mid)) best = world.grid.center(c);
  }
  p.listeners = {Listener{best, 1.0, 40.0}};
  return p;
}

}  // namespace

ReproResult run_repro(const ReproConfig& cfg, const fs::path& out, const ProgressFn& progress) {
  validate(cfg);
  const auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };
  for (const auto* sub : {"data", "models", "metrics", "plans", "rasters"}) {
    fs::create_directories(out / sub);
  }

  const auto maps = repro_maps(cfg);
  const int a = cfg.train_maps, b = a + cfg.val_maps, c = b + cfg.test_maps;
  say("generating datasets");
  const auto train = make_split(maps, 0, a, Split::train, cfg.train_per_map, cfg, out);
  const auto val = make_split(maps, a, b, Split::val, cfg.eval_per_map, cfg, out);
  const auto test = make_split(maps, b, c, Split::test, cfg.eval_per_map, cfg, out);

  std::vector<double> truth;
  for (const auto& s : test.samples) truth.push_back(s.y);

  ReproResult result;
  std::vector<PredictorModel> models;
  std::ofstream summary(out / "metrics" / "summary.csv");
  summary.precision(10);
  summary << "model,auc,acc_1,acc_4,best_epoch\n";
  for (const auto kind : cfg.models) {
    say("training " + kind_name(kind));
    auto tc = train_config_for(kind, cfg.seed);
    tc.epochs = cfg.epochs;
    auto trained = train_model(kind, tc, train.samples, val.samples);
    const auto name = kind_name(kind);
    save_model(out / "models" / (name + ".json"), trained.model);
    if (is_network(kind)) write_train_log_csv(out / "models" / (name + "_log.csv"), trained.log);

    ModelScore s;
    s.kind = kind;
    s.curve = eps_accuracy(truth, predict_samples(trained.model, test.samples));
    s.auc = curve_auc(s.curve);
    s.best_epoch = trained.log.best_epoch;
    write_curve_csv(out / "metrics" / (name + "_curve.csv"), s.curve);
    write_distribution_csv(out / "metrics" / (name + "_dist.csv"),
                           distribution(test.samples, trained.model));
    summary << name << ',' << s.auc << ',' << s.curve.at(1.0 / 128) << ','
            << s.curve.at(4.0 / 128) << ',' << s.best_epoch << '\n';
    result.scores.push_back(std::move(s));
    models.push_back(std::move(trained.model));
  }

  // Downstream products use the panorama model when it was trained.
  std::size_t pick = 0;
  for (std::size_t i = 0; i < cfg.models.size(); ++i) {
    if (cfg.models[i] == ModelKind::vis_pano) pick = i;
  }
  const auto& model = models[pick];
  const auto& world = test.maps.front();

  say("planning");
  auto problem = corner_problem(world);
  problem.model = &model;
  problem.actions = default_actions();
  for (std::size_t i = 0; i < cfg.plan_lambdas.size(); ++i) {
    problem.lambda = cfg.plan_lambdas[i];
    const auto p = plan(problem);
    std::ofstream f(out / "plans" / ("plan_" + std::to_string(i) + ".json"));
    f << plan_to_json(problem, p) << '\n';
  }

  say("acoustic maps");
  const auto listener = problem.listeners.front().pose;
  const auto fl = fixed_listener_map(world, listener, model, cfg.jobs);
  write_raster_json(out / "rasters" / "fixed_listener.json", fl);
  write_raster_csv(out / "rasters" / "fixed_listener.csv", fl);
  const auto fr = fixed_robot_map(world, listener, model);
  write_raster_json(out / "rasters" / "fixed_robot.json", fr);
  write_raster_csv(out / "rasters" / "fixed_robot.csv", fr);
  return result;
}

}  // namespace anavi
