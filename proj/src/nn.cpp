#include "anavi/nn.hpp"

#include <cmath>

#include "anavi/error.hpp"
#include "anavi/rng.hpp"

namespace anavi::nn {

namespace {

using RowVec = Eigen::RowVectorXd;
using ConstMatMap = Eigen::Map<const Mat>;
using MatMap = Eigen::Map<Mat>;
using ConstRowMap = Eigen::Map<const RowVec>;
using RowMap = Eigen::Map<RowVec>;

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
  return cdf + x * pdf;
}

std::size_t param_size(const Layer& l) {
  switch (l.kind) {
    case LayerKind::linear: return static_cast<std::size_t>(l.in * l.out + l.out);
    case LayerKind::batch_norm: return static_cast<std::size_t>(2 * l.out);
    default: return 0;
  }
}

}  // namespace

std::string activation_name(Activation a) { return a == Activation::relu ? "relu" : "gelu"; }

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "gelu") return Activation::gelu;
  throw DataError("unknown activation '" + s + "'");
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) throw UsageError("MlpSpec needs at least 2 layer sizes");
  for (int s : layer_sizes) {
    if (s < 1) throw UsageError("MlpSpec layer sizes must be positive");
  }
  if (head == Head::scalar && layer_sizes.back() != 1) {
    throw UsageError("scalar head needs a final layer of size 1");
  }
  if (head == Head::logits && layer_sizes.back() < 2) {
    throw UsageError("logits head needs at least 2 outputs");
  }
  if (scan_features < 0 || visual_width < 0 || dirdist_width < 0) {
    throw UsageError("MlpSpec encoder sizes must be non-negative");
  }
  if ((scan_features > 0) != (visual_width > 0)) {
    throw UsageError("scan features require a visual encoder width and vice versa");
  }
  const int trunk_in = visual_width + (dirdist_width > 0 ? dirdist_width : 2);
  if (layer_sizes.front() != trunk_in) {
    throw UsageError("first trunk layer size " + std::to_string(layer_sizes.front()) +
                     " does not match encoder output " + std::to_string(trunk_in));
  }
}

Network::Network(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t offset = 0, state = 0;
  const auto add = [&](Stage& st, LayerKind kind, int in, int out) {
    Layer l{kind, in, out, offset, state};
    offset += param_size(l);
    if (kind == LayerKind::batch_norm) state += static_cast<std::size_t>(2 * out);
    st.layers.push_back(l);
  };
  const auto act = spec_.activation == Activation::relu ? LayerKind::relu : LayerKind::gelu;

  if (spec_.scan_features > 0) {
    Stage visual{2, 2 + spec_.scan_features, {}};
    add(visual, LayerKind::linear, spec_.scan_features, spec_.visual_width);
    if (spec_.batch_norm) add(visual, LayerKind::batch_norm, spec_.visual_width, spec_.visual_width);
    add(visual, act, spec_.visual_width, spec_.visual_width);
    branches_.push_back(std::move(visual));
  }
  Stage dirdist{0, 2, {}};
  if (spec_.dirdist_width > 0) add(dirdist, LayerKind::linear, 2, spec_.dirdist_width);
  branches_.push_back(std::move(dirdist));

  const auto& sizes = spec_.layer_sizes;
  trunk_.input_begin = 0;
  trunk_.input_end = sizes.front();
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    add(trunk_, LayerKind::linear, sizes[i], sizes[i + 1]);
    if (i + 2 < sizes.size()) {
      if (spec_.batch_norm) add(trunk_, LayerKind::batch_norm, sizes[i + 1], sizes[i + 1]);
      add(trunk_, act, sizes[i + 1], sizes[i + 1]);
    }
  }
  params_.assign(offset, 0.0);
  running_.assign(state, 0.0);
  init(0);
}

void Network::init(std::uint64_t seed) {
  Rng rng(seed);
  const auto init_stage = [&](const Stage& st) {
    for (const auto& l : st.layers) {
      if (l.kind == LayerKind::linear) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
        for (std::size_t i = 0; i < param_size(l); ++i) {
          params_[l.offset + i] = rng.uniform(-bound, bound);
        }
      } else if (l.kind == LayerKind::batch_norm) {
        for (int i = 0; i < l.out; ++i) {
          params_[l.offset + static_cast<std::size_t>(i)] = 1.0;
          params_[l.offset + static_cast<std::size_t>(l.out + i)] = 0.0;
          running_[l.state + static_cast<std::size_t>(i)] = 0.0;
          running_[l.state + static_cast<std::size_t>(l.out + i)] = 1.0;
        }
      }
    }
  };
  for (const auto& b : branches_) init_stage(b);
  init_stage(trunk_);
}

Mat Network::run_stage(std::size_t index, const Stage& stage, const Mat& x_in, Mode mode,
                       Workspace* ws, double* stats_update) const {
  Workspace::StageCache* cache = ws ? &ws->stages[index] : nullptr;
  if (cache) {
    cache->inputs.assign(stage.layers.size(), Mat());
    cache->xhat.assign(stage.layers.size(), Mat());
    cache->inv_std.assign(stage.layers.size(), Vec());
  }
  Mat x = x_in;
  const auto n = static_cast<double>(x.rows());
  for (std::size_t li = 0; li < stage.layers.size(); ++li) {
    const Layer& l = stage.layers[li];
    if (cache) cache->inputs[li] = x;
    switch (l.kind) {
      case LayerKind::linear: {
        ConstMatMap w(params_.data() + l.offset, l.in, l.out);
        ConstRowMap b(params_.data() + l.offset + static_cast<std::size_t>(l.in * l.out), l.out);
        Mat y = x * w;
        y.rowwise() += b;
        x = std::move(y);
        break;
      }
      case LayerKind::batch_norm: {
        ConstRowMap gamma(params_.data() + l.offset, l.out);
        ConstRowMap beta(params_.data() + l.offset + static_cast<std::size_t>(l.out), l.out);
        RowVec mean, var;
        if (mode == Mode::train) {
          mean = x.colwise().mean();
          var = (x.rowwise() - mean).array().square().colwise().mean().matrix();
          if (stats_update) {
            RowMap rmean(stats_update + l.state, l.out);
            RowMap rvar(stats_update + l.state + static_cast<std::size_t>(l.out), l.out);
            const double unbias = n > 1 ? n / (n - 1) : 1.0;
            rmean = (1 - kBnMomentum) * rmean + kBnMomentum * mean;
            rvar = (1 - kBnMomentum) * rvar + kBnMomentum * unbias * var;
          }
        } else {
          mean = ConstRowMap(running_.data() + l.state, l.out);
          var = ConstRowMap(running_.data() + l.state + static_cast<std::size_t>(l.out), l.out);
        }
        const RowVec inv = (var.array() + kBnEps).rsqrt().matrix();
        Mat xhat = (x.rowwise() - mean).array().rowwise() * inv.array();
        if (cache) {
          cache->xhat[li] = xhat;
          cache->inv_std[li] = inv.transpose();
        }
        x = (xhat.array().rowwise() * gamma.array()).matrix();
        x.rowwise() += beta;
        break;
      }
      case LayerKind::relu:
        x = x.cwiseMax(0.0);
        break;
      case LayerKind::gelu:
        x = x.unaryExpr([](double v) { return gelu(v); });
        break;
    }
  }
  return x;
}

Mat Network::run(const Mat& x, Mode mode, Workspace* ws, double* stats) const {
  if (x.cols() != spec_.input_size()) {
    throw UsageError("network expects " + std::to_string(spec_.input_size()) +
                     " inputs, got " + std::to_string(x.cols()));
  }
  if (ws) ws->stages.assign(branches_.size() + 1, {});
  std::vector<Mat> encodings;
  Eigen::Index width = 0;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const auto& b = branches_[i];
    const Mat slice = x.middleCols(b.input_begin, b.input_end - b.input_begin);
    encodings.push_back(run_stage(i, b, slice, mode, ws, stats));
    width += encodings.back().cols();
  }
  Mat z(x.rows(), width);
  Eigen::Index col = 0;
  for (const auto& e : encodings) {
    z.middleCols(col, e.cols()) = e;
    col += e.cols();
  }
  return run_stage(branches_.size(), trunk_, z, mode, ws, stats);
}

Mat Network::forward(const Mat& x, Mode mode, Workspace* ws) {
  return run(x, mode, ws, mode == Mode::train ? running_.data() : nullptr);
}

Mat Network::predict(const Mat& x) const { return run(x, Mode::eval, nullptr, nullptr); }

void Network::backward_stage(const Stage& stage, const Workspace::StageCache& cache, Mat d,
                             std::vector<double>& grad, Mat* d_input) const {
  for (std::size_t k = stage.layers.size(); k-- > 0;) {
    const Layer& l = stage.layers[k];
    const Mat& x = cache.inputs[k];
    switch (l.kind) {
      case LayerKind::linear: {
        ConstMatMap w(params_.data() + l.offset, l.in, l.out);
        MatMap dw(grad.data() + l.offset, l.in, l.out);
        RowMap db(grad.data() + l.offset + static_cast<std::size_t>(l.in * l.out), l.out);
        dw.noalias() += x.transpose() * d;
        db += d.colwise().sum();
        if (k > 0 || d_input) {
          Mat dx = d * w.transpose();
          d = std::move(dx);
        }
        break;
      }
      case LayerKind::batch_norm: {
        ConstRowMap gamma(params_.data() + l.offset, l.out);
        RowMap dgamma(grad.data() + l.offset, l.out);
        RowMap dbeta(grad.data() + l.offset + static_cast<std::size_t>(l.out), l.out);
        const Mat& xhat = cache.xhat[k];
        const RowVec inv = cache.inv_std[k].transpose();
        dgamma += (d.array() * xhat.array()).colwise().sum().matrix();
        dbeta += d.colwise().sum();
        const Mat dxhat = (d.array().rowwise() * gamma.array()).matrix();
        const double n = static_cast<double>(d.rows());
        const RowVec sum_dxhat = dxhat.colwise().sum();
        const RowVec sum_dxhat_xhat = (dxhat.array() * xhat.array()).colwise().sum().matrix();
        Mat dx = (n * dxhat.array()).matrix();
        dx.rowwise() -= sum_dxhat;
        dx -= (xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
        d = (dx.array().rowwise() * (inv.array() / n)).matrix();
        break;
      }
      case LayerKind::relu:
        d = (d.array() * (x.array() > 0.0).cast<double>()).matrix();
        break;
      case LayerKind::gelu:
        d = (d.array() * x.unaryExpr([](double v) { return gelu_grad(v); }).array()).matrix();
        break;
    }
  }
  if (d_input) *d_input = std::move(d);
}

void Network::backward(const Workspace& ws, const Mat& d_out, std::vector<double>& grad) const {
  if (ws.stages.size() != branches_.size() + 1) {
    throw UsageError("backward: workspace does not come from a training forward pass");
  }
  grad.assign(params_.size(), 0.0);
  Mat dz;
  backward_stage(trunk_, ws.stages.back(), d_out, grad, &dz);
  int col = 0;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const auto& b = branches_[i];
    const int width = b.output_size(b.input_end - b.input_begin);
    if (!b.layers.empty()) {
      backward_stage(b, ws.stages[i], dz.middleCols(col, width), grad, nullptr);
    }
    col += width;
  }
}

double huber(double e, double delta) {
  const double a = std::abs(e);
  return a <= delta ? 0.5 * e * e : delta * (a - 0.5 * delta);
}

double huber_grad(double e, double delta) {
  return std::abs(e) <= delta ? e : (e > 0 ? delta : -delta);
}

LossResult huber_loss(const Mat& out, std::span<const double> targets, double delta) {
  if (out.cols() != 1 || static_cast<std::size_t>(out.rows()) != targets.size()) {
    throw UsageError("huber_loss: shape mismatch");
  }
  LossResult r;
  r.grad.resize(out.rows(), 1);
  const double n = static_cast<double>(out.rows());
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double e = out(i, 0) - targets[static_cast<std::size_t>(i)];
    r.loss += huber(e, delta);
    r.grad(i, 0) = huber_grad(e, delta) / n;
  }
  r.loss /= n;
  return r;
}

LossResult cross_entropy_loss(const Mat& logits, std::span<const int> classes) {
  if (static_cast<std::size_t>(logits.rows()) != classes.size()) {
    throw UsageError("cross_entropy_loss: shape mismatch");
  }
  LossResult r;
  r.grad.resize(logits.rows(), logits.cols());
  const double n = static_cast<double>(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int c = classes[static_cast<std::size_t>(i)];
    if (c < 0 || c >= logits.cols()) throw UsageError("cross_entropy_loss: class out of range");
    const double mx = logits.row(i).maxCoeff();
    const RowVec ex = (logits.row(i).array() - mx).exp().matrix();
    const double sum = ex.sum();
    r.loss += std::log(sum) + mx - logits(i, c);
    r.grad.row(i) = ex / (sum * n);
    r.grad(i, c) -= 1.0 / n;
  }
  r.loss /= n;
  return r;
}

AdamW::AdamW(std::size_t n, AdamWConfig cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

void AdamW::step(std::vector<double>& params, const std::vector<double>& grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw UsageError("AdamW: parameter count changed");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
    params[i] *= 1.0 - lr * cfg_.weight_decay;
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
  }
}

}  // namespace anavi::nn
