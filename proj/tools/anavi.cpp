#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "anavi/acousticmap.hpp"
#include "anavi/audiomeasure.hpp"
#include "anavi/dataset.hpp"
#include "anavi/error.hpp"
#include "anavi/mapgen.hpp"
#include "anavi/metrics.hpp"
#include "anavi/pipeline.hpp"
#include "anavi/planner.hpp"
#include "anavi/predictor.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace anavi;

namespace {

enum class Level { quiet, info, debug };

struct Globals {
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string log_level = "info";

  Level level() const {
    if (log_level == "quiet") return Level::quiet;
    if (log_level == "debug") return Level::debug;
    return Level::info;
  }
  std::uint64_t resolved_seed() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("ANAVI_SEED")) {
      try {
        std::size_t used = 0;
        const auto v = std::stoull(env, &used);
        if (used == std::string(env).size()) return v;
      } catch (const std::exception&) {
      }
      throw UsageError(std::string("ANAVI_SEED is not an unsigned integer: '") + env + "'");
    }
    return 0;
  }
};

Globals g;

void log(Level at, const std::string& msg) {
  if (g.level() >= at) std::cerr << "[anavi] " << msg << '\n';
}

Pose2 parse_xy(const std::string& s, const std::string& what) {
  std::stringstream in(s);
  double x = 0, y = 0;
  char comma = 0;
  if (!(in >> x >> comma >> y) || comma != ',' || !in.eof()) {
    throw UsageError(what + " must be X,Y in meters, got '" + s + "'");
  }
  return {x, y};
}

Listener parse_listener(const std::string& s) {
  std::vector<double> v;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError("bad --listener '" + s + "'");
    }
  }
  if (v.size() < 2 || v.size() > 4) {
    throw UsageError("--listener must be X,Y[,weight[,threshold_db]], got '" + s + "'");
  }
  Listener l{{v[0], v[1]}};
  if (v.size() > 2) l.weight = v[2];
  if (v.size() > 3) l.threshold_db = v[3];
  return l;
}

PredictorModel model_arg(const std::string& s) {
  if (s == "heuristic" && !fs::exists(s)) return make_heuristic();
  return load_model(s);
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

// run.json echoes every option of the subcommand, defaults included.
void write_run_json(const CLI::App& sub, const fs::path& where, json resolved = json::object()) {
  json opts = json::object();
  for (const auto* o : sub.get_options()) {
    const auto name = o->get_single_name();
    if (name == "help") continue;
    if (o->count() > 0) {
      const auto& r = o->results();
      if (o->get_expected_max() > 1 || r.size() > 1) {
        opts[name] = r;
      } else if (o->get_type_size() == 0) {
        opts[name] = true;
      } else {
        opts[name] = r.empty() ? "" : r.front();
      }
    } else if (o->get_type_size() == 0) {
      opts[name] = false;
    } else {
      opts[name] = o->get_default_str();
    }
  }
  json j = {{"subcommand", sub.get_name()},
            {"seed", g.resolved_seed()},
            {"jobs", g.jobs},
            {"log_level", g.log_level},
            {"options", std::move(opts)},
            {"resolved", std::move(resolved)}};
  ensure_parent(where);
  std::ofstream f(where);
  if (!f) throw DataError("cannot write " + where.string());
  f << j.dump(2) << '\n';
}

json acoustic_json(const AcousticConfig& c) {
  return {{"n_rays", c.n_rays},           {"max_bounces", c.max_bounces},
          {"energy_floor", c.energy_floor}, {"listener_radius", c.listener_radius},
          {"air_density", c.air_density}, {"sound_speed", c.sound_speed},
          {"bin_width", c.bin_width},     {"max_time", c.max_time}};
}

json train_json(const TrainConfig& c) {
  return {{"loss", c.loss == LossKind::huber ? "huber" : "cross_entropy"},
          {"huber_delta", c.huber_delta},
          {"learning_rate", c.learning_rate},
          {"lr_decay", c.lr_decay},
          {"decay_every", c.decay_every},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"weight_decay", c.weight_decay},
          {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}}};
}

json actions_json(const std::vector<ActionProfile>& actions) {
  json a = json::array();
  for (const auto& x : actions) {
    a.push_back({{"name", x.name}, {"speed", x.speed}, {"source_db", x.source_db}});
  }
  return a;
}

// File outputs get a sibling <stem>.run.json, directory outputs a run.json.
fs::path run_json_for_file(const fs::path& out) {
  auto p = out;
  p.replace_extension(".run.json");
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acoustic noise prediction and noise-aware planning toolkit"};
  app.require_subcommand(1);
  app.add_option("--seed", g.seed, "Run seed (falls back to ANAVI_SEED, then 0)");
  app.add_option("--jobs", g.jobs, "Worker thread cap")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--log-level", g.log_level, "quiet|info|debug")
      ->check(CLI::IsMember({"quiet", "info", "debug"}))
      ->capture_default_str();
  app.fallthrough();

  // gen-maps
  std::string gm_out;
  int gm_count = 15;
  std::string gm_prefix = "m";
  FloorplanConfig gm_cfg;
  auto* gen_maps = app.add_subcommand("gen-maps", "Generate random floorplans");
  gen_maps->add_option("--out", gm_out, "Output directory")->required();
  gen_maps->add_option("--count", gm_count)->check(CLI::PositiveNumber)->capture_default_str();
  gen_maps->add_option("--prefix", gm_prefix)->capture_default_str();
  gen_maps->add_option("--min-size", gm_cfg.min_size, "Cells per side")->capture_default_str();
  gen_maps->add_option("--max-size", gm_cfg.max_size, "Cells per side")->capture_default_str();

  // gen-data
  std::string gd_maps, gd_split, gd_out;
  GenerateOptions gd;
  gd.per_map = 2000;
  auto* gen_data = app.add_subcommand("gen-data", "Label source/listener pairs with the ray tracer");
  gen_data->add_option("--maps", gd_maps, "Directory of map files")->required();
  gen_data->add_option("--split", gd_split)->required()->check(CLI::IsMember({"train", "val", "test"}));
  gen_data->add_option("--per-map", gd.per_map)->check(CLI::PositiveNumber)->capture_default_str();
  gen_data->add_option("--bins", gd.n_bins, "Panorama bins")->check(CLI::PositiveNumber)->capture_default_str();
  gen_data->add_option("--rays", gd.acoustic.n_rays)->check(CLI::PositiveNumber)->capture_default_str();
  gen_data->add_option("--out", gd_out, "Output .jsonl")->required();

  // train
  std::string tr_model, tr_train, tr_val, tr_out, tr_log;
  std::optional<int> tr_epochs;
  std::optional<double> tr_lr, tr_wd;
  auto* train = app.add_subcommand("train", "Fit a predictor");
  train->add_option("--model", tr_model)->required();
  train->add_option("--train", tr_train)->required();
  train->add_option("--val", tr_val)->required();
  train->add_option("--out", tr_out, "Model file")->required();
  train->add_option("--log", tr_log, "Training log CSV (default <out>_log.csv)");
  train->add_option("--epochs", tr_epochs)->check(CLI::PositiveNumber);
  train->add_option("--lr", tr_lr)->check(CLI::PositiveNumber);
  train->add_option("--weight-decay", tr_wd)->check(CLI::NonNegativeNumber);

  // eval
  std::string ev_model, ev_data, ev_curve, ev_dist;
  auto* eval = app.add_subcommand("eval", "Epsilon-accuracy curve and prediction dump");
  eval->add_option("--model", ev_model)->required();
  eval->add_option("--data", ev_data)->required();
  eval->add_option("--out-curve", ev_curve)->required();
  eval->add_option("--out-dist", ev_dist)->required();

  // acoustic-map
  std::string am_mode, am_at, am_model = "heuristic", am_map, am_out;
  bool am_oracle = false;
  int am_rays = 4096;
  auto* amap = app.add_subcommand("acoustic-map", "Loudness raster over a map");
  amap->add_option("--mode", am_mode)->required()->check(CLI::IsMember({"fixed_robot", "fixed_listener"}));
  amap->add_option("--at", am_at, "Anchor X,Y in meters")->required();
  amap->add_option("--model", am_model)->capture_default_str();
  amap->add_option("--map", am_map)->required();
  amap->add_option("--out", am_out, "Raster JSON; a .csv is written alongside")->required();
  amap->add_flag("--oracle", am_oracle, "Use the ray tracer instead of the model");
  amap->add_option("--rays", am_rays, "Rays per oracle trace")->check(CLI::PositiveNumber)->capture_default_str();

  // plan
  std::string pl_map, pl_model = "heuristic", pl_start, pl_goal, pl_actions, pl_out;
  std::vector<std::string> pl_listeners;
  double pl_lambda = 0.0;
  int pl_sim_rays = 0;
  auto* planc = app.add_subcommand("plan", "Noise-aware path planning");
  planc->add_option("--map", pl_map)->required();
  planc->add_option("--model", pl_model)->capture_default_str();
  planc->add_option("--start", pl_start)->required();
  planc->add_option("--goal", pl_goal)->required();
  planc->add_option("--listener", pl_listeners, "X,Y[,weight[,threshold_db]]")->take_all();
  planc->add_option("--lambda", pl_lambda)->check(CLI::NonNegativeNumber)->capture_default_str();
  planc->add_option("--actions", pl_actions, "Actions JSON (default: bundled profiles)");
  planc->add_option("--simulate", pl_sim_rays, "Ray-trace listener dB along the plan with N rays")
      ->capture_default_str();
  planc->add_option("--out", pl_out)->required();

  // measure
  std::string me_wav, me_out;
  double me_offset = 0.0;
  auto* measure = app.add_subcommand("measure", "Max dB of a recording");
  measure->add_option("--wav", me_wav)->required();
  measure->add_option("--offset", me_offset, "Calibration offset in dB")->capture_default_str();
  measure->add_option("--out", me_out, "Optional JSON result");

  // compare
  std::string co_manifest, co_model = "heuristic", co_pano, co_out;
  std::optional<double> co_source;
  double co_offset = 0.0;
  auto* compare = app.add_subcommand("compare", "Measured vs predicted loudness table");
  compare->add_option("--manifest", co_manifest)->required();
  compare->add_option("--model", co_model)->capture_default_str();
  compare->add_option("--pano-from", co_pano, "MAP:X,Y robot pose for the scan");
  compare->add_option("--source-db", co_source, "Robot loudness (default: manifest source_db)");
  compare->add_option("--offset", co_offset, "Calibration offset in dB")->capture_default_str();
  compare->add_option("--out", co_out)->required();

  // repro
  ReproConfig rp;
  std::string rp_out;
  std::vector<std::string> rp_models;
  auto* repro = app.add_subcommand("repro", "Full desk-scale pipeline");
  repro->add_option("--out", rp_out)->required();
  repro->add_option("--train-maps", rp.train_maps)->check(CLI::PositiveNumber)->capture_default_str();
  repro->add_option("--val-maps", rp.val_maps)->check(CLI::PositiveNumber)->capture_default_str();
  repro->add_option("--test-maps", rp.test_maps)->check(CLI::PositiveNumber)->capture_default_str();
  repro->add_option("--train-per-map", rp.train_per_map)->check(CLI::PositiveNumber)->capture_default_str();
  repro->add_option("--eval-per-map", rp.eval_per_map)->check(CLI::PositiveNumber)->capture_default_str();
  repro->add_option("--epochs", rp.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  repro->add_option("--models", rp_models, "Model kinds (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::usage);
  }

  try {
    const auto seed = g.resolved_seed();

    if (gen_maps->parsed()) {
      fs::create_directories(gm_out);
      for (int i = 0; i < gm_count; ++i) {
        char id[64];
        std::snprintf(id, sizeof id, "%s%02d", gm_prefix.c_str(), i);
        const auto w = generate_floorplan(id, derive_seed(seed, static_cast<std::uint64_t>(i)), gm_cfg);
        save_map(fs::path(gm_out) / (std::string(id) + ".json"), w);
      }
      log(Level::info, "wrote " + std::to_string(gm_count) + " maps to " + gm_out);
      write_run_json(*gen_maps, fs::path(gm_out) / "run.json");
    } else if (gen_data->parsed()) {
      const auto maps = load_map_dir(gd_maps);
      gd.seed = seed;
      gd.jobs = g.jobs;
      log(Level::info, "labelling " + std::to_string(maps.size() * gd.per_map) + " samples");
      const auto samples = generate(maps, gd);
      ensure_parent(gd_out);
      write_dataset(gd_out, samples);
      DatasetManifest m;
      m.split = parse_split(gd_split);
      for (const auto& w : maps) m.map_ids.push_back(w.grid.id());
      m.samples_per_map = gd.per_map;
      m.seed = seed;
      m.acoustic_cfg = gd.acoustic;
      write_manifest(manifest_path_for(gd_out), m);
      write_run_json(*gen_data, run_json_for_file(gd_out),
                     {{"acoustic", acoustic_json(gd.acoustic)},
                      {"sampling", {{"source_radius", gd.sampling.source_radius},
                                    {"listener_radius", gd.sampling.listener_radius},
                                    {"grid_points", gd.sampling.grid_points},
                                    {"max_retries", gd.sampling.max_retries}}}});
    } else if (train->parsed()) {
      const auto kind = parse_kind(tr_model);
      const auto tr = read_dataset(tr_train);
      const auto va = read_dataset(tr_val);
      auto cfg = train_config_for(kind, seed);
      if (tr_epochs) cfg.epochs = *tr_epochs;
      if (tr_lr) cfg.learning_rate = *tr_lr;
      if (tr_wd) cfg.weight_decay = *tr_wd;
      log(Level::info, "training " + tr_model + " on " + std::to_string(tr.size()) + " samples");
      const auto r = train_model(kind, cfg, tr, va);
      ensure_parent(tr_out);
      save_model(tr_out, r.model);
      if (tr_log.empty()) {
        auto p = fs::path(tr_out);
        tr_log = (p.parent_path() / (p.stem().string() + "_log.csv")).string();
      }
      write_train_log_csv(tr_log, r.log);
      if (r.log.best_epoch >= 0) {
        log(Level::info, "best epoch " + std::to_string(r.log.best_epoch) + ", val loss " +
                             std::to_string(r.log.best_val_loss));
      }
      write_run_json(*train, run_json_for_file(tr_out),
                     {{"train", train_json(cfg)}, {"log", tr_log}});
    } else if (eval->parsed()) {
      const auto model = model_arg(ev_model);
      const auto data = read_dataset(ev_data);
      std::vector<double> truth;
      for (const auto& s : data) truth.push_back(s.y);
      const auto curve = eps_accuracy(truth, predict_samples(model, data));
      ensure_parent(ev_curve);
      ensure_parent(ev_dist);
      write_curve_csv(ev_curve, curve);
      write_distribution_csv(ev_dist, distribution(data, model));
      std::cout << "auc " << curve_auc(curve) << "  acc@1/128 " << curve.at(1.0 / 128)
                << "  acc@4/128 " << curve.at(4.0 / 128) << '\n';
      write_run_json(*eval, run_json_for_file(ev_curve));
    } else if (amap->parsed()) {
      const auto world = load_map(am_map);
      const auto mode = parse_mode(am_mode);
      const auto anchor = parse_xy(am_at, "--at");
      AcousticRaster raster;
      if (am_oracle) {
        AcousticConfig cfg;
        cfg.n_rays = am_rays;
        raster = oracle_map(world, mode, anchor, cfg, seed, g.jobs);
      } else {
        const auto model = model_arg(am_model);
        raster = mode == RasterMode::fixed_robot ? fixed_robot_map(world, anchor, model)
                                                 : fixed_listener_map(world, anchor, model, g.jobs);
      }
      ensure_parent(am_out);
      write_raster_json(am_out, raster);
      auto csv = fs::path(am_out);
      csv.replace_extension(".csv");
      write_raster_csv(csv, raster);
      write_run_json(*amap, run_json_for_file(am_out),
                     {{"source", am_oracle ? "oracle" : raster.model_kind}});
    } else if (planc->parsed()) {
      const auto world = load_map(pl_map);
      const auto model = model_arg(pl_model);
      PlanProblem p;
      p.world = &world;
      p.model = &model;
      p.start = parse_xy(pl_start, "--start");
      p.goal = parse_xy(pl_goal, "--goal");
      for (const auto& l : pl_listeners) p.listeners.push_back(parse_listener(l));
      p.actions = pl_actions.empty() ? default_actions() : load_actions(pl_actions);
      p.lambda = pl_lambda;
      const auto result = plan(p);
      auto j = json::parse(plan_to_json(p, result));
      if (pl_sim_rays > 0) {
        AcousticConfig cfg;
        cfg.n_rays = pl_sim_rays;
        j["simulated_listener_db"] = simulate_plan_audio(p, result, cfg, seed);
      }
      ensure_parent(pl_out);
      std::ofstream f(pl_out);
      if (!f) throw DataError("cannot write " + pl_out);
      f << j.dump(2) << '\n';
      log(Level::info, std::to_string(result.steps.size()) + " steps, time " +
                           std::to_string(result.total_time) + " s, cost " +
                           std::to_string(result.total_cost));
      write_run_json(*planc, run_json_for_file(pl_out), {{"actions", actions_json(p.actions)}});
    } else if (measure->parsed()) {
      const auto w = load_wav(me_wav);
      const double db = waveform_db(w, me_offset);
      std::cout << db << '\n';
      if (!me_out.empty()) {
        ensure_parent(me_out);
        std::ofstream f(me_out);
        f << json{{"wav", me_wav}, {"db", db}, {"offset", me_offset},
                  {"sample_rate", w.sample_rate}, {"duration", w.duration()}}.dump(2)
          << '\n';
        write_run_json(*measure, run_json_for_file(me_out));
      }
    } else if (compare->parsed()) {
      const auto inputs = load_measurements(co_manifest);
      double source_db = 0.0;
      if (co_source) {
        source_db = *co_source;
      } else {
        std::ifstream in(co_manifest);
        const auto j = json::parse(in);
        if (!j.contains("source_db")) throw UsageError("--source-db is required: manifest has no source_db");
        source_db = j.at("source_db").get<double>();
      }
      const auto model = model_arg(co_model);
      PanoramaScan scan;
      if (!co_pano.empty()) {
        const auto colon = co_pano.rfind(':');
        if (colon == std::string::npos) throw UsageError("--pano-from must be MAP:X,Y");
        const auto world = load_map(co_pano.substr(0, colon));
        scan = observe(world, parse_xy(co_pano.substr(colon + 1), "--pano-from pose"), model);
      } else if (is_network(model.kind)) {
        throw UsageError("--pano-from is required for " + kind_name(model.kind));
      }
      const auto table = compare_table(inputs, model, scan, source_db, co_offset);
      ensure_parent(co_out);
      write_table_csv(co_out, table);
      for (const auto& r : table) {
        std::printf("%-8s measured %6.2f  predicted %6.2f  error %6.2f\n", r.label.c_str(),
                    r.db_measured, r.db_predicted, r.error);
      }
      write_run_json(*compare, run_json_for_file(co_out), {{"source_db", source_db}});
    } else if (repro->parsed()) {
      rp.seed = seed;
      rp.jobs = g.jobs;
      if (!rp_models.empty()) {
        rp.models.clear();
        for (const auto& m : rp_models) rp.models.push_back(parse_kind(m));
      }
      const auto result = run_repro(rp, rp_out, [](const std::string& s) { log(Level::info, s); });
      for (const auto& s : result.scores) {
        std::printf("%-10s auc %.4f  acc@1/128 %.3f  acc@4/128 %.3f\n", kind_name(s.kind).c_str(),
                    s.auc, s.curve.at(1.0 / 128), s.curve.at(4.0 / 128));
      }
      json models = json::array();
      for (const auto k : rp.models) models.push_back(kind_name(k));
      json lambdas = rp.plan_lambdas;
      write_run_json(*repro, fs::path(rp_out) / "run.json",
                     {{"models", models},
                      {"plan_lambdas", lambdas},
                      {"acoustic", acoustic_json(AcousticConfig{})},
                      {"actions", actions_json(default_actions())}});
    }
  } catch (const Error& e) {
    const char* kind = e.kind() == ErrorKind::usage ? "usage"
                       : e.kind() == ErrorKind::data ? "data"
                                                     : "no_path";
    std::cerr << "error: kind=" << kind << " message=" << json(std::string(e.what())).dump() << '\n';
    return static_cast<int>(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: kind=data message=" << json(std::string(e.what())).dump() << '\n';
    return static_cast<int>(ErrorKind::data);
  } catch (const json::exception& e) {
    std::cerr << "error: kind=data message=" << json(std::string(e.what())).dump() << '\n';
    return static_cast<int>(ErrorKind::data);
  }
  return 0;
}
