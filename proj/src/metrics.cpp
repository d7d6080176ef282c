#include "anavi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "anavi/error.hpp"

namespace anavi {

double EpsCurve::at(double eps) const {
  if (epsilons.empty()) throw UsageError("empty curve");
  std::size_t best = 0;
  for (std::size_t i = 1; i < epsilons.size(); ++i) {
    if (std::abs(epsilons[i] - eps) < std::abs(epsilons[best] - eps)) best = i;
  }
  return accuracies[best];
}

std::vector<double> default_epsilons() {
  std::vector<double> e;
  for (int k = 1; k <= 16; ++k) e.push_back(k / 128.0);
  return e;
}

EpsCurve eps_accuracy(const std::vector<double>& y_true, const std::vector<double>& y_pred,
                      std::vector<double> epsilons) {
  if (y_true.size() != y_pred.size()) {
    throw UsageError("eps_accuracy: length mismatch (" + std::to_string(y_true.size()) +
                     " vs " + std::to_string(y_pred.size()) + ")");
  }
  if (y_true.empty()) throw UsageError("eps_accuracy: empty input");
  if (epsilons.empty()) throw UsageError("eps_accuracy: no thresholds");
  std::sort(epsilons.begin(), epsilons.end());

  std::vector<double> err(y_true.size());
  for (std::size_t i = 0; i < err.size(); ++i) err[i] = std::abs(y_true[i] - y_pred[i]);
  std::sort(err.begin(), err.end());

  EpsCurve c;
  c.n = err.size();
  c.epsilons = epsilons;
  for (double e : epsilons) {
    const auto within = std::upper_bound(err.begin(), err.end(), e) - err.begin();
    c.accuracies.push_back(static_cast<double>(within) / static_cast<double>(c.n));
  }
  return c;
}

double curve_auc(const EpsCurve& c) {
  if (c.epsilons.size() < 2 || c.epsilons.size() != c.accuracies.size()) {
    throw UsageError("curve_auc: need at least 2 grid points");
  }
  const double span = c.epsilons.back() - c.epsilons.front();
  if (!(span > 0.0)) throw UsageError("curve_auc: degenerate epsilon grid");
  double area = 0.0;
  for (std::size_t i = 1; i < c.epsilons.size(); ++i) {
    area += 0.5 * (c.accuracies[i] + c.accuracies[i - 1]) *
            (c.epsilons[i] - c.epsilons[i - 1]);
  }
  return area / span;
}

void write_curve_csv(const std::filesystem::path& path, const EpsCurve& curve) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(10);
  out << "epsilon,accuracy\n";
  for (std::size_t i = 0; i < curve.epsilons.size(); ++i) {
    out << curve.epsilons[i] << ',' << curve.accuracies[i] << '\n';
  }
}

std::vector<DistributionRow> distribution(const std::vector<Sample>& samples,
                                          const PredictorModel& model) {
  const auto pred = predict_samples(model, samples);
  std::vector<DistributionRow> rows;
  rows.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    rows.push_back({samples[i].r, samples[i].y, pred[i], samples[i].map_id});
  }
  return rows;
}

void write_distribution_csv(const std::filesystem::path& path,
                            const std::vector<DistributionRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(10);
  out << "r,y_true,y_pred,map_id\n";
  for (const auto& r : rows) {
    out << r.r << ',' << r.y_true << ',' << r.y_pred << ',' << r.map_id << '\n';
  }
}

}  // namespace anavi
