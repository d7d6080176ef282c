#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "anavi/dataset.hpp"
#include "anavi/nn.hpp"
#include "anavi/sensing.hpp"

namespace anavi {

enum class ModelKind {
  heuristic,
  dislinreg,
  dirdismlp,
  vis_pano,
  vis_ego,
  binned16,
  binned64,
  binned128,
};

std::string kind_name(ModelKind k);
ModelKind parse_kind(const std::string& name);
FeatureLayout layout_for(ModelKind k);
bool is_network(ModelKind k);
// Number of classification bins, 0 for regressors.
int bins_for(ModelKind k);

// Architecture used for a network kind with panoramas of n_bins bins.
nn::MlpSpec default_spec(ModelKind k, int n_bins = kDefaultScanBins);

struct PredictorModel {
  ModelKind kind = ModelKind::heuristic;
  FeatureLayout input_layout = FeatureLayout::dirdist;
  int input_size = 2;
  std::optional<nn::Network> net;
  // dislinreg: y = c0 + c1 * log10(r/10 + 1e-3) + c2 * r/10
  std::array<double, 3> linreg{0.0, 0.0, 0.0};
};

inline constexpr double kLinRegLogOffset = 1e-3;

PredictorModel make_heuristic();

// y_hat in [0, 1]. Heuristic and dislinreg read only r and accept any
// layout; network models require their own layout.
double predict(const PredictorModel& model, const FeatureVector& features);
std::vector<double> predict_batch(const PredictorModel& model,
                                  const std::vector<FeatureVector>& features);
std::vector<double> predict_samples(const PredictorModel& model,
                                    const std::vector<Sample>& samples);

// Queries closer than this are treated as at this range.
inline constexpr double kMinQueryRange = 0.25;  // m

// Panorama bins the model was trained with (default for distance-only kinds).
int scan_bins_for(const PredictorModel& model);

// The observation a model needs at a robot pose. Distance-only models skip
// the geometric scan and get an origin-only scan.
PanoramaScan observe(const WorldMap& world, const Pose2& robot, const PredictorModel& model);

// Prediction for a listener at `listener` given the scan taken at the robot
// (scan.origin). The distance must not exceed kMaxListenerRange.
double predict_from_scan(const PredictorModel& model, const PanoramaScan& scan,
                         const Pose2& listener);

// Least squares on the basis [1, log10(r/10 + 1e-3), r/10].
PredictorModel fit_dislinreg(const std::vector<Sample>& samples);

// floor(y * m) clamped to m - 1.
int bin_label(double y, int m);

enum class LossKind { huber, cross_entropy };

struct TrainConfig {
  LossKind loss = LossKind::huber;
  double huber_delta = 0.1;
  double learning_rate = 0.01;
  double lr_decay = 0.95;
  int decay_every = 10;  // epochs
  int batch_size = 64;
  int epochs = 60;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  nn::AdamWConfig adam;

  double lr_at(int epoch) const;
};

// Suitable loss for a model kind (cross-entropy for binned classifiers).
TrainConfig train_config_for(ModelKind kind, std::uint64_t seed);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  int best_epoch = -1;
  double best_val_loss = 0.0;
  double weight_decay = 0.0;
};

struct TrainResult {
  PredictorModel model;
  TrainLog log;
};

nn::Mat feature_matrix(const std::vector<Sample>& samples, FeatureLayout layout);

// Mini-batch AdamW training; returns the parameters with the best
// validation loss.
TrainResult train_network(ModelKind kind, const nn::MlpSpec& spec, const TrainConfig& cfg,
                          const std::vector<Sample>& train_set,
                          const std::vector<Sample>& val_set);

// Fits any model kind with its default architecture and recipe.
TrainResult train_model(ModelKind kind, const TrainConfig& cfg,
                        const std::vector<Sample>& train_set,
                        const std::vector<Sample>& val_set);

void write_train_log_csv(const std::filesystem::path& path, const TrainLog& log);

std::string model_to_json(const PredictorModel& model);
PredictorModel model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const PredictorModel& model);
PredictorModel load_model(const std::filesystem::path& path);

}  // namespace anavi
