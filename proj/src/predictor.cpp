#include "anavi/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "json.hpp"

#include "anavi/acoustics.hpp"
#include "anavi/error.hpp"

namespace anavi {

using nlohmann::json;

namespace {

constexpr int kModelFormatVersion = 1;

struct KindInfo {
  ModelKind kind;
  const char* name;
  FeatureLayout layout;
  int bins;
};

constexpr KindInfo kKinds[] = {
    {ModelKind::heuristic, "heuristic", FeatureLayout::dirdist, 0},
    {ModelKind::dislinreg, "dislinreg", FeatureLayout::dirdist, 0},
    {ModelKind::dirdismlp, "dirdismlp", FeatureLayout::dirdist, 0},
    {ModelKind::vis_pano, "vis_pano", FeatureLayout::pano, 0},
    {ModelKind::vis_ego, "vis_ego", FeatureLayout::ego, 0},
    {ModelKind::binned16, "binned16", FeatureLayout::pano, 16},
    {ModelKind::binned64, "binned64", FeatureLayout::pano, 64},
    {ModelKind::binned128, "binned128", FeatureLayout::pano, 128},
};

const KindInfo& info(ModelKind k) {
  for (const auto& i : kKinds) {
    if (i.kind == k) return i;
  }
  throw UsageError("unknown model kind");
}

double clamp01(double v) {
  // NaN maps to 0 so predictions stay in range whatever the parameters.
  return v >= 0.0 ? std::min(v, 1.0) : 0.0;
}

double linreg_eval(const std::array<double, 3>& c, double r_norm) {
  return c[0] + c[1] * std::log10(r_norm + kLinRegLogOffset) + c[2] * r_norm;
}

double heuristic_from_rnorm(double r_norm) {
  return heuristic_db(r_norm * kMaxListenerRange).y;
}

}  // namespace

std::string kind_name(ModelKind k) { return info(k).name; }

ModelKind parse_kind(const std::string& name) {
  for (const auto& i : kKinds) {
    if (name == i.name) return i.kind;
  }
  throw UsageError("unknown model kind '" + name + "'");
}

FeatureLayout layout_for(ModelKind k) { return info(k).layout; }

bool is_network(ModelKind k) {
  return k != ModelKind::heuristic && k != ModelKind::dislinreg;
}

int bins_for(ModelKind k) { return info(k).bins; }

nn::MlpSpec default_spec(ModelKind k, int n_bins) {
  nn::MlpSpec spec;
  switch (k) {
    case ModelKind::dirdismlp:
      spec.layer_sizes = {2, 8, 8, 1};
      spec.activation = nn::Activation::relu;
      return spec;
    case ModelKind::vis_pano:
    case ModelKind::vis_ego:
    case ModelKind::binned16:
    case ModelKind::binned64:
    case ModelKind::binned128: {
      const int per_scan = k == ModelKind::vis_ego ? n_bins / 4 : n_bins;
      spec.scan_features = 2 * per_scan;
      spec.visual_width = 64;
      spec.dirdist_width = 16;
      spec.activation = nn::Activation::gelu;
      const int bins = bins_for(k);
      spec.head = bins > 0 ? nn::Head::logits : nn::Head::scalar;
      spec.layer_sizes = {80, 64, 32, 8, bins > 0 ? bins : 1};
      return spec;
    }
    default:
      throw UsageError("model kind '" + kind_name(k) + "' is not a network");
  }
}

PredictorModel make_heuristic() { return PredictorModel{}; }

namespace {

void check_layout(const PredictorModel& model, const FeatureVector& f) {
  if (f.values.size() < 2) throw UsageError("feature vector too short");
  if (!is_network(model.kind)) return;
  if (f.layout != model.input_layout || static_cast<int>(f.values.size()) != model.input_size) {
    throw UsageError("layout mismatch: model '" + kind_name(model.kind) + "' expects '" +
                     std::string(layout_name(model.input_layout)) + "' features of size " +
                     std::to_string(model.input_size) + ", got '" +
                     std::string(layout_name(f.layout)) + "' of size " +
                     std::to_string(f.values.size()));
  }
}

std::vector<double> outputs_to_y(const PredictorModel& model, const nn::Mat& out) {
  std::vector<double> y(static_cast<std::size_t>(out.rows()));
  const int bins = bins_for(model.kind);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    if (bins > 0) {
      Eigen::Index best = 0;
      out.row(i).maxCoeff(&best);
      y[static_cast<std::size_t>(i)] = (static_cast<double>(best) + 0.5) / bins;
    } else {
      y[static_cast<std::size_t>(i)] = clamp01(out(i, 0));
    }
  }
  return y;
}

}  // namespace

double predict(const PredictorModel& model, const FeatureVector& features) {
  return predict_batch(model, {features}).front();
}

std::vector<double> predict_batch(const PredictorModel& model,
                                  const std::vector<FeatureVector>& features) {
  for (const auto& f : features) check_layout(model, f);
  std::vector<double> out(features.size());
  switch (model.kind) {
    case ModelKind::heuristic:
      for (std::size_t i = 0; i < features.size(); ++i) {
        out[i] = heuristic_from_rnorm(features[i].values[0]);
      }
      return out;
    case ModelKind::dislinreg:
      for (std::size_t i = 0; i < features.size(); ++i) {
        out[i] = clamp01(linreg_eval(model.linreg, features[i].values[0]));
      }
      return out;
    default:
      break;
  }
  if (!model.net) throw DataError("network model has no parameters");
  nn::Mat x(static_cast<Eigen::Index>(features.size()), model.input_size);
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (int j = 0; j < model.input_size; ++j) {
      x(static_cast<Eigen::Index>(i), j) = features[i].values[static_cast<std::size_t>(j)];
    }
  }
  return outputs_to_y(model, model.net->predict(x));
}

int scan_bins_for(const PredictorModel& model) {
  switch (model.input_layout) {
    case FeatureLayout::pano: return (model.input_size - 2) / 2;
    case FeatureLayout::ego: return (model.input_size - 2) * 2;
    default: return kDefaultScanBins;
  }
}

PanoramaScan observe(const WorldMap& world, const Pose2& robot, const PredictorModel& model) {
  if (is_network(model.kind)) return scan_panorama(world, robot, scan_bins_for(model));
  if (!is_traversable(world.grid, robot)) throw UsageError("robot pose is not traversable");
  PanoramaScan scan;
  scan.origin = robot;
  return scan;
}

double predict_from_scan(const PredictorModel& model, const PanoramaScan& scan,
                         const Pose2& listener) {
  const double r = std::max(distance(scan.origin, listener), kMinQueryRange);
  if (r > kMaxListenerRange) throw UsageError("listener beyond the model's 10 m support");
  return predict(model, build_features(scan, r, bearing(scan.origin, listener),
                                       model.input_layout));
}

nn::Mat feature_matrix(const std::vector<Sample>& samples, FeatureLayout layout) {
  if (samples.empty()) return {};
  const auto d = static_cast<Eigen::Index>(
      feature_size(layout, samples.front().scan.n_bins));
  nn::Mat x(static_cast<Eigen::Index>(samples.size()), d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto f = samples[i].features(layout);
    if (static_cast<Eigen::Index>(f.values.size()) != d) {
      throw DataError("samples have inconsistent scan sizes");
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      x(static_cast<Eigen::Index>(i), j) = f.values[static_cast<std::size_t>(j)];
    }
  }
  return x;
}

std::vector<double> predict_samples(const PredictorModel& model,
                                    const std::vector<Sample>& samples) {
  std::vector<double> out(samples.size());
  if (!is_network(model.kind)) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double r_norm = samples[i].r / kMaxListenerRange;
      out[i] = model.kind == ModelKind::heuristic
                   ? heuristic_from_rnorm(r_norm)
                   : clamp01(linreg_eval(model.linreg, r_norm));
    }
    return out;
  }
  if (!model.net) throw DataError("network model has no parameters");
  constexpr std::size_t chunk = 4096;
  for (std::size_t begin = 0; begin < samples.size(); begin += chunk) {
    const std::size_t end = std::min(samples.size(), begin + chunk);
    const std::vector<Sample> part(samples.begin() + static_cast<long>(begin),
                                   samples.begin() + static_cast<long>(end));
    const nn::Mat x = feature_matrix(part, model.input_layout);
    if (x.cols() != model.input_size) {
      throw UsageError("layout mismatch: model expects " + std::to_string(model.input_size) +
                       " features, samples provide " + std::to_string(x.cols()));
    }
    const auto y = outputs_to_y(model, model.net->predict(x));
    std::copy(y.begin(), y.end(), out.begin() + static_cast<long>(begin));
  }
  return out;
}

PredictorModel fit_dislinreg(const std::vector<Sample>& samples) {
  std::set<double> distinct;
  for (const auto& s : samples) distinct.insert(s.r);
  if (distinct.size() < 2) {
    throw DataError("dislinreg needs at least 2 samples with distinct r");
  }
  Eigen::MatrixXd a(static_cast<Eigen::Index>(samples.size()), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double r_norm = samples[i].r / kMaxListenerRange;
    const auto row = static_cast<Eigen::Index>(i);
    a(row, 0) = 1.0;
    a(row, 1) = std::log10(r_norm + kLinRegLogOffset);
    a(row, 2) = r_norm;
    b(row) = samples[i].y;
  }
  // Rank-revealing solve so that two distinct distances (rank 2) still yield
  // the minimum-norm least squares fit.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  if (cod.rank() < 2) throw DataError("dislinreg: singular design matrix");
  const Eigen::Vector3d c = cod.solve(b);
  if (!c.allFinite()) throw DataError("dislinreg: non-finite coefficients");
  PredictorModel m;
  m.kind = ModelKind::dislinreg;
  m.input_layout = FeatureLayout::dirdist;
  m.input_size = 2;
  m.linreg = {c(0), c(1), c(2)};
  return m;
}

int bin_label(double y, int m) {
  if (m < 1) throw UsageError("bin_label: m must be positive");
  const double scaled = std::floor(y * m);
  if (!(scaled >= 0.0)) return 0;
  return std::min(static_cast<int>(std::min(scaled, 1e9)), m - 1);
}

double TrainConfig::lr_at(int epoch) const {
  return learning_rate * std::pow(lr_decay, epoch / decay_every);
}

TrainConfig train_config_for(ModelKind kind, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.seed = seed;
  if (bins_for(kind) > 0) cfg.loss = LossKind::cross_entropy;
  return cfg;
}

namespace {

nn::Mat rows_of(const nn::Mat& x, const std::vector<std::size_t>& idx, std::size_t begin,
                std::size_t end) {
  nn::Mat out(static_cast<Eigen::Index>(end - begin), x.cols());
  for (std::size_t i = begin; i < end; ++i) {
    out.row(static_cast<Eigen::Index>(i - begin)) = x.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

struct Targets {
  std::vector<double> y;
  std::vector<int> cls;
};

Targets targets_of(const std::vector<Sample>& samples, int bins) {
  Targets t;
  for (const auto& s : samples) {
    t.y.push_back(s.y);
    if (bins > 0) t.cls.push_back(bin_label(s.y, bins));
  }
  return t;
}

nn::LossResult loss_of(const TrainConfig& cfg, const nn::Mat& out, const Targets& t,
                       const std::vector<std::size_t>& idx, std::size_t begin,
                       std::size_t end) {
  if (cfg.loss == LossKind::huber) {
    std::vector<double> y;
    for (std::size_t i = begin; i < end; ++i) y.push_back(t.y[idx[i]]);
    return nn::huber_loss(out, y, cfg.huber_delta);
  }
  std::vector<int> c;
  for (std::size_t i = begin; i < end; ++i) c.push_back(t.cls[idx[i]]);
  return nn::cross_entropy_loss(out, c);
}

}  // namespace

TrainResult train_network(ModelKind kind, const nn::MlpSpec& spec, const TrainConfig& cfg,
                          const std::vector<Sample>& train_set,
                          const std::vector<Sample>& val_set) {
  if (train_set.empty() || val_set.empty()) {
    throw UsageError("train: datasets must be non-empty");
  }
  if (cfg.batch_size < 1 || cfg.epochs < 1 || !(cfg.learning_rate > 0.0) ||
      !(cfg.huber_delta > 0.0) || cfg.decay_every < 1 || !(cfg.lr_decay > 0.0) ||
      cfg.weight_decay < 0.0) {
    throw UsageError("train: invalid training configuration");
  }
  const int bins = spec.head == nn::Head::logits ? spec.output_size() : 0;
  if ((cfg.loss == LossKind::cross_entropy) != (bins > 0)) {
    throw UsageError("train: cross-entropy goes with a logits head, Huber with a scalar head");
  }
  const FeatureLayout layout = layout_for(kind);
  const nn::Mat x_train = feature_matrix(train_set, layout);
  const nn::Mat x_val = feature_matrix(val_set, layout);
  if (x_train.cols() != spec.input_size() || x_val.cols() != spec.input_size()) {
    throw UsageError("train: feature size does not match the architecture");
  }
  const Targets t_train = targets_of(train_set, bins);
  const Targets t_val = targets_of(val_set, bins);

  nn::Network net(spec);
  net.init(derive_seed(cfg.seed, 0x1417));
  nn::AdamWConfig adam = cfg.adam;
  adam.weight_decay = cfg.weight_decay;
  nn::AdamW opt(net.param_count(), adam);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> val_idx(val_set.size());
  std::iota(val_idx.begin(), val_idx.end(), 0);

  TrainResult result;
  result.log.weight_decay = cfg.weight_decay;
  std::vector<double> best_params = net.params();
  std::vector<double> best_stats = net.running_stats();
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> grad;
  nn::Workspace ws;
  const auto n = order.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    Rng shuffle_rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t seen = 0;
    int batch_no = 0;
    for (std::size_t begin = 0; begin < n; begin += bs, ++batch_no) {
      const std::size_t end = std::min(n, begin + bs);
      // Batch statistics are undefined for a single row.
      if (spec.batch_norm && end - begin < 2) continue;
      const nn::Mat xb = rows_of(x_train, order, begin, end);
      const nn::Mat out = net.forward(xb, nn::Mode::train, &ws);
      const auto loss = loss_of(cfg, out, t_train, order, begin, end);
      if (!std::isfinite(loss.loss)) {
        std::ostringstream os;
        os << "non-finite training loss at epoch " << epoch << ", batch " << batch_no
           << ", lr " << lr;
        throw DataError(os.str());
      }
      net.backward(ws, loss.grad, grad);
      opt.step(net.params(), grad, lr);
      loss_sum += loss.loss * static_cast<double>(end - begin);
      seen += end - begin;
    }
    const nn::Mat val_out = net.predict(x_val);
    const double val_loss = loss_of(cfg, val_out, t_val, val_idx, 0, val_idx.size()).loss;
    if (!std::isfinite(val_loss)) {
      std::ostringstream os;
      os << "non-finite validation loss at epoch " << epoch << ", lr " << lr;
      throw DataError(os.str());
    }
    result.log.epochs.push_back({epoch, seen ? loss_sum / static_cast<double>(seen) : 0.0,
                                 val_loss, lr});
    if (val_loss < best) {
      best = val_loss;
      best_params = net.params();
      best_stats = net.running_stats();
      result.log.best_epoch = epoch;
    }
  }
  result.log.best_val_loss = best;
  net.params() = best_params;
  net.running_stats() = best_stats;

  result.model.kind = kind;
  result.model.input_layout = layout;
  result.model.input_size = spec.input_size();
  result.model.net = std::move(net);
  return result;
}

TrainResult train_model(ModelKind kind, const TrainConfig& cfg,
                        const std::vector<Sample>& train_set,
                        const std::vector<Sample>& val_set) {
  TrainResult r;
  switch (kind) {
    case ModelKind::heuristic:
      r.model = make_heuristic();
      return r;
    case ModelKind::dislinreg:
      r.model = fit_dislinreg(train_set);
      return r;
    default:
      if (train_set.empty()) throw UsageError("train: empty training set");
      return train_network(kind, default_spec(kind, train_set.front().scan.n_bins), cfg,
                           train_set, val_set);
  }
}

void write_train_log_csv(const std::filesystem::path& path, const TrainLog& log) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(10);
  out << "epoch,train_loss,val_loss,lr\n";
  for (const auto& e : log.epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.lr << '\n';
  }
}

std::string model_to_json(const PredictorModel& model) {
  json j;
  j["format"] = "anavi-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = kind_name(model.kind);
  j["input_layout"] = std::string(layout_name(model.input_layout));
  j["input_size"] = model.input_size;
  if (model.kind == ModelKind::dislinreg) j["linreg"] = model.linreg;
  if (model.net) {
    const auto& s = model.net->spec();
    j["spec"] = {{"layer_sizes", s.layer_sizes},
                 {"activation", nn::activation_name(s.activation)},
                 {"batch_norm", s.batch_norm},
                 {"head", s.head == nn::Head::logits ? "logits" : "scalar"},
                 {"scan_features", s.scan_features},
                 {"visual_width", s.visual_width},
                 {"dirdist_width", s.dirdist_width}};
    j["params"] = model.net->params();
    j["running_stats"] = model.net->running_stats();
  }
  return j.dump() + "\n";
}

PredictorModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("corrupted model file: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != "anavi-model") {
      throw DataError("not an anavi model file");
    }
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError("unsupported model format version " + std::to_string(version));
    }
    PredictorModel m;
    m.kind = parse_kind(j.at("kind").get<std::string>());
    m.input_layout = parse_layout(j.at("input_layout").get<std::string>());
    m.input_size = j.at("input_size").get<int>();
    if (m.kind == ModelKind::dislinreg) {
      m.linreg = j.at("linreg").get<std::array<double, 3>>();
    }
    if (is_network(m.kind)) {
      const auto& js = j.at("spec");
      nn::MlpSpec spec;
      spec.layer_sizes = js.at("layer_sizes").get<std::vector<int>>();
      spec.activation = nn::parse_activation(js.at("activation").get<std::string>());
      spec.batch_norm = js.at("batch_norm").get<bool>();
      spec.head = js.at("head").get<std::string>() == "logits" ? nn::Head::logits
                                                               : nn::Head::scalar;
      spec.scan_features = js.at("scan_features").get<int>();
      spec.visual_width = js.at("visual_width").get<int>();
      spec.dirdist_width = js.at("dirdist_width").get<int>();
      nn::Network net(spec);
      auto params = j.at("params").get<std::vector<double>>();
      auto stats = j.at("running_stats").get<std::vector<double>>();
      if (params.size() != net.param_count() || stats.size() != net.running_stats().size()) {
        throw DataError("parameter count does not match the layer layout");
      }
      if (spec.input_size() != m.input_size) {
        throw DataError("input size does not match the layer layout");
      }
      net.params() = std::move(params);
      net.running_stats() = std::move(stats);
      m.net = std::move(net);
    }
    if (m.input_layout != layout_for(m.kind)) {
      throw DataError("input layout does not match model kind");
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupted model file: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("corrupted model file: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const PredictorModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model " + path.string());
  out << model_to_json(model);
}

PredictorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return model_from_json(buf.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace anavi
