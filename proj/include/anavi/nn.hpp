#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace anavi::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

enum class Activation { relu, gelu };
enum class Head { scalar, logits };

std::string activation_name(Activation a);
Activation parse_activation(const std::string& s);

// Layer sizes of the predictor trunk plus optional input encoders. Inputs are
// laid out as [r, theta, scan...]. With scan_features > 0 the scan slice goes
// through linear -> batch norm -> activation to visual_width; with
// dirdist_width > 0 (r, theta) are linearly projected to dirdist_width. The
// encodings (visual first) are concatenated and fed to the trunk, whose
// hidden blocks are linear -> [batch norm] -> activation and whose last layer
// is a plain linear head.
struct MlpSpec {
  std::vector<int> layer_sizes;
  Activation activation = Activation::gelu;
  bool batch_norm = true;
  Head head = Head::scalar;
  int scan_features = 0;
  int visual_width = 0;
  int dirdist_width = 0;

  int input_size() const { return 2 + scan_features; }
  int output_size() const { return layer_sizes.back(); }
  void validate() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

enum class LayerKind { linear, batch_norm, relu, gelu };

struct Layer {
  LayerKind kind;
  int in = 0;
  int out = 0;
  std::size_t offset = 0;  // into the flat parameter array
  std::size_t state = 0;   // into running statistics (batch norm)
};

struct Stage {
  int input_begin = 0;  // column slice of the stage input
  int input_end = 0;
  std::vector<Layer> layers;

  int output_size(int fallback) const {
    return layers.empty() ? fallback : layers.back().out;
  }
};

enum class Mode { train, eval };

// Activations recorded by a forward pass, consumed by backward().
struct Workspace {
  struct StageCache {
    std::vector<Mat> inputs;  // input of each layer
    std::vector<Mat> xhat;    // batch norm normalized input, per layer
    std::vector<Vec> inv_std;
  };
  std::vector<StageCache> stages;  // branches, then trunk
};

class Network {
 public:
  static constexpr double kBnEps = 1e-5;
  static constexpr double kBnMomentum = 0.1;

  Network() = default;
  explicit Network(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  std::size_t param_count() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  // Batch norm running mean and variance, interleaved per layer.
  std::vector<double>& running_stats() { return running_; }
  const std::vector<double>& running_stats() const { return running_; }

  // Fan-in scaled uniform weights and biases; batch norm scale 1, shift 0.
  void init(std::uint64_t seed);

  // Training mode normalizes with batch statistics and updates the running
  // statistics; evaluation mode uses the running statistics.
  Mat forward(const Mat& x, Mode mode, Workspace* ws = nullptr);
  Mat predict(const Mat& x) const;

  // Accumulates dLoss/dParams into grad (resized and zeroed).
  void backward(const Workspace& ws, const Mat& d_out, std::vector<double>& grad) const;

 private:
  Mat run(const Mat& x, Mode mode, Workspace* ws, double* stats) const;
  Mat run_stage(std::size_t index, const Stage& stage, const Mat& x, Mode mode,
                Workspace* ws, double* stats_update) const;
  void backward_stage(const Stage& stage, const Workspace::StageCache& cache,
                      Mat d, std::vector<double>& grad, Mat* d_input) const;

  MlpSpec spec_;
  std::vector<Stage> branches_;
  Stage trunk_;
  std::vector<double> params_;
  std::vector<double> running_;
};

// Huber loss with threshold delta: e^2/2 inside, delta(|e| - delta/2) outside.
double huber(double e, double delta);
double huber_grad(double e, double delta);

struct LossResult {
  double loss = 0.0;
  Mat grad;  // dLoss/dOutput, same shape as the output
};

// Mean Huber loss of a (batch x 1) output against targets.
LossResult huber_loss(const Mat& out, std::span<const double> targets, double delta);

// Mean softmax cross-entropy of (batch x m) logits against class indices.
LossResult cross_entropy_loss(const Mat& logits, std::span<const int> classes);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Adaptive-moment optimizer with decoupled weight decay.
class AdamW {
 public:
  AdamW(std::size_t n, AdamWConfig cfg);
  void step(std::vector<double>& params, const std::vector<double>& grad, double lr);
  long steps() const { return t_; }

 private:
  AdamWConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

}  // namespace anavi::nn
