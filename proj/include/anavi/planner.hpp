#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "anavi/acoustics.hpp"
#include "anavi/gridmap.hpp"
#include "anavi/predictor.hpp"

namespace anavi {

struct ActionProfile {
  std::string name;
  double speed = 1.0;       // m/s
  double source_db = 76.0;  // loudness at the robot
};

struct Listener {
  Pose2 pose;
  double weight = 1.0;
  double threshold_db = 0.0;  // noise below this costs nothing
};

struct PlanProblem {
  const WorldMap* world = nullptr;
  const PredictorModel* model = nullptr;
  Pose2 start;
  Pose2 goal;
  std::vector<Listener> listeners;
  std::vector<ActionProfile> actions;
  double lambda = 0.0;

  void validate() const;
};

struct PlanStep {
  Cell cell;  // cell entered by this step
  std::size_t action = 0;
  double dt = 0.0;
  double noise = 0.0;  // weighted hinge dB at the entered cell
  double cost = 0.0;
};

struct Plan {
  Cell start;
  std::vector<PlanStep> steps;
  double total_time = 0.0;
  double total_noise_cost = 0.0;  // sum of noise * dt
  double total_cost = 0.0;
  // Predicted dB per listener per step.
  std::vector<std::vector<double>> per_listener_trace;

  std::vector<Cell> cells() const;
};

// Per-cell listener loudness with memoized scans and predictions.
class NoiseField {
 public:
  explicit NoiseField(const PlanProblem& problem);

  // Predicted dB at each listener with the robot at `cell` doing `action`.
  std::vector<double> node_noise(const Cell& cell, const ActionProfile& action);
  // Weighted hinge sum over listeners.
  double weighted_noise(const Cell& cell, const ActionProfile& action);
  std::size_t scans_taken() const { return scans_; }

 private:
  const std::vector<double>& transfer(const Cell& cell);

  const PlanProblem& problem_;
  std::map<int, std::vector<double>> y_;  // per cell index, per listener
  std::size_t scans_ = 0;
};

std::vector<double> node_noise(const PlanProblem& problem, const Cell& cell,
                               const ActionProfile& action);

// Step time; throws UsageError unless `to` is an allowed 8-neighbour of
// `from` (no corner cutting).
double step_time(const GridMap& map, const Cell& from, const Cell& to,
                 const ActionProfile& action);

double edge_cost(const PlanProblem& problem, const Cell& from, const Cell& to,
                 const ActionProfile& action);
double edge_cost(double dt, double weighted_noise, double lambda);

// Allowed moves out of a cell, in a fixed order.
std::vector<Cell> neighbours(const GridMap& map, const Cell& c);

// Cost-minimal plan by A*. Throws NoPathError if the goal is unreachable.
Plan plan(const PlanProblem& problem);

// Ray-traced dB at each listener for each step.
std::vector<std::vector<double>> simulate_plan_audio(const PlanProblem& problem,
                                                     const Plan& plan,
                                                     const AcousticConfig& cfg,
                                                     std::uint64_t seed);

// Same entries as data/actions.json.
std::vector<ActionProfile> default_actions();
std::vector<ActionProfile> parse_actions(const std::string& json_text);
std::vector<ActionProfile> load_actions(const std::filesystem::path& path);
std::string plan_to_json(const PlanProblem& problem, const Plan& plan);

}  // namespace anavi
