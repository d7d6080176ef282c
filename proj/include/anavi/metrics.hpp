#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "anavi/dataset.hpp"
#include "anavi/predictor.hpp"

namespace anavi {

struct EpsCurve {
  std::vector<double> epsilons;
  std::vector<double> accuracies;
  std::size_t n = 0;

  // Accuracy at the grid point closest to eps.
  double at(double eps) const;
};

// k/128 for k = 1..16.
std::vector<double> default_epsilons();

// Fraction of |y_true - y_pred| <= eps per threshold (inclusive boundary).
EpsCurve eps_accuracy(const std::vector<double>& y_true, const std::vector<double>& y_pred,
                      std::vector<double> epsilons = default_epsilons());

// Trapezoidal area under the curve divided by the epsilon span.
double curve_auc(const EpsCurve& curve);

void write_curve_csv(const std::filesystem::path& path, const EpsCurve& curve);

struct DistributionRow {
  double r = 0.0;
  double y_true = 0.0;
  double y_pred = 0.0;
  std::string map_id;
};

std::vector<DistributionRow> distribution(const std::vector<Sample>& samples,
                                          const PredictorModel& model);
void write_distribution_csv(const std::filesystem::path& path,
                            const std::vector<DistributionRow>& rows);

}  // namespace anavi
