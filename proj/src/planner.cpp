#include "anavi/planner.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

#include "json.hpp"

#include "anavi/error.hpp"
#include "anavi/sensing.hpp"

namespace anavi {

using nlohmann::json;

void PlanProblem::validate() const {
  if (!world || !model) throw UsageError("plan: map and model are required");
  if (actions.empty()) throw UsageError("plan: at least one action is required");
  if (!(lambda >= 0.0)) throw UsageError("plan: lambda must be >= 0");
  for (const auto& a : actions) {
    if (!(a.speed > 0.0)) throw UsageError("action '" + a.name + "': speed must be > 0");
    if (!(a.source_db > 0.0 && a.source_db <= kDbCeiling)) {
      throw UsageError("action '" + a.name + "': source_db must be in (0, 128]");
    }
  }
  for (const auto& l : listeners) {
    if (!(l.weight >= 0.0)) throw UsageError("listener weight must be >= 0");
    if (!(l.threshold_db >= 0.0)) throw UsageError("listener threshold must be >= 0");
    if (!world->grid.in_bounds(l.pose)) throw UsageError("listener outside the map");
  }
  if (!is_traversable(world->grid, start)) throw UsageError("plan: start is not traversable");
  if (!is_traversable(world->grid, goal)) throw UsageError("plan: goal is not traversable");
}

std::vector<Cell> Plan::cells() const {
  std::vector<Cell> out{start};
  for (const auto& s : steps) out.push_back(s.cell);
  return out;
}

NoiseField::NoiseField(const PlanProblem& problem) : problem_(problem) {}

const std::vector<double>& NoiseField::transfer(const Cell& cell) {
  const auto& g = problem_.world->grid;
  if (!g.free(cell)) throw UsageError("node_noise: cell is not traversable");
  const int key = g.index(cell);
  if (const auto it = y_.find(key); it != y_.end()) return it->second;

  const Pose2 robot = g.center(cell);
  std::vector<double> y(problem_.listeners.size(), 0.0);
  std::optional<PanoramaScan> scan;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (distance(robot, problem_.listeners[j].pose) > kMaxListenerRange) continue;
    if (!scan) {
      scan = observe(*problem_.world, robot, *problem_.model);
      ++scans_;
    }
    y[j] = predict_from_scan(*problem_.model, *scan, problem_.listeners[j].pose);
  }
  return y_.emplace(key, std::move(y)).first->second;
}

std::vector<double> NoiseField::node_noise(const Cell& cell, const ActionProfile& action) {
  const auto& y = transfer(cell);
  std::vector<double> db(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) db[j] = scale_action_db(y[j], action.source_db);
  return db;
}

double NoiseField::weighted_noise(const Cell& cell, const ActionProfile& action) {
  const auto db = node_noise(cell, action);
  double sum = 0.0;
  for (std::size_t j = 0; j < db.size(); ++j) {
    const auto& l = problem_.listeners[j];
    sum += l.weight * std::max(0.0, db[j] - l.threshold_db);
  }
  return sum;
}

std::vector<double> node_noise(const PlanProblem& problem, const Cell& cell,
                               const ActionProfile& action) {
  NoiseField field(problem);
  return field.node_noise(cell, action);
}

namespace {

constexpr std::pair<int, int> kMoves[] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1},
                                          {1, 1}, {1, -1}, {-1, 1}, {-1, -1}};

bool move_allowed(const GridMap& g, const Cell& from, int dx, int dy) {
  const Cell to{from.x + dx, from.y + dy};
  if (!g.free(to)) return false;
  if (dx != 0 && dy != 0) {
    // no squeezing past an obstacle corner
    return g.free({from.x + dx, from.y}) && g.free({from.x, from.y + dy});
  }
  return true;
}

}  // namespace

std::vector<Cell> neighbours(const GridMap& map, const Cell& c) {
  std::vector<Cell> out;
  for (auto [dx, dy] : kMoves) {
    if (move_allowed(map, c, dx, dy)) out.push_back({c.x + dx, c.y + dy});
  }
  return out;
}

double step_time(const GridMap& map, const Cell& from, const Cell& to,
                 const ActionProfile& action) {
  const int dx = to.x - from.x, dy = to.y - from.y;
  if (std::abs(dx) > 1 || std::abs(dy) > 1 || (dx == 0 && dy == 0)) {
    throw UsageError("edge_cost: cells are not adjacent");
  }
  if (!map.free(from) || !move_allowed(map, from, dx, dy)) {
    throw UsageError("edge_cost: move is blocked");
  }
  const double len = (dx != 0 && dy != 0) ? map.cell_size() * std::sqrt(2.0) : map.cell_size();
  return len / action.speed;
}

double edge_cost(double dt, double weighted_noise, double lambda) {
  return dt + lambda * weighted_noise * dt;
}

double edge_cost(const PlanProblem& problem, const Cell& from, const Cell& to,
                 const ActionProfile& action) {
  problem.validate();
  const double dt = step_time(problem.world->grid, from, to, action);
  NoiseField field(problem);
  return edge_cost(dt, field.weighted_noise(to, action), problem.lambda);
}

Plan plan(const PlanProblem& problem) {
  problem.validate();
  const auto& g = problem.world->grid;
  const Cell start = g.cell_at(problem.start);
  const Cell goal = g.cell_at(problem.goal);
  NoiseField field(problem);

  double max_speed = 0.0;
  for (const auto& a : problem.actions) max_speed = std::max(max_speed, a.speed);
  const Pose2 goal_center = g.center(goal);
  const auto h = [&](const Cell& c) { return distance(g.center(c), goal_center) / max_speed; };

  const auto n = g.cells().size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> best(n, kInf);
  std::vector<int> parent(n, -1);
  std::vector<PlanStep> via(n);
  std::vector<char> closed(n, 0);

  using Entry = std::pair<double, int>;  // (f, cell index); ties go to the lower index
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  const int s = g.index(start);
  best[static_cast<std::size_t>(s)] = 0.0;
  open.push({h(start), s});

  bool found = false;
  while (!open.empty()) {
    const auto [f, idx] = open.top();
    open.pop();
    const auto u = static_cast<std::size_t>(idx);
    if (closed[u]) continue;
    closed[u] = 1;
    const Cell c = g.cell_of_index(idx);
    if (c == goal) {
      found = true;
      break;
    }
    for (const auto& nb : neighbours(g, c)) {
      const auto v = static_cast<std::size_t>(g.index(nb));
      if (closed[v]) continue;
      // cheapest action for this edge, first in list order on ties
      PlanStep step;
      step.cost = kInf;
      step.cell = nb;
      for (std::size_t a = 0; a < problem.actions.size(); ++a) {
        const auto& act = problem.actions[a];
        const double dt = step_time(g, c, nb, act);
        const double noise = field.weighted_noise(nb, act);
        const double cost = edge_cost(dt, noise, problem.lambda);
        if (cost < step.cost) {
          step.cost = cost;
          step.action = a;
          step.dt = dt;
          step.noise = noise;
        }
      }
      const double cand = best[u] + step.cost;
      if (cand < best[v]) {
        best[v] = cand;
        parent[v] = idx;
        via[v] = step;
        open.push({cand + h(nb), static_cast<int>(v)});
      }
    }
  }
  if (!found) {
    std::ostringstream os;
    os << "no path from (" << problem.start.x << ", " << problem.start.y << ") to ("
       << problem.goal.x << ", " << problem.goal.y << ") on map '" << g.id() << "'";
    throw NoPathError(os.str());
  }

  Plan out;
  out.start = start;
  for (int v = g.index(goal); v != s; v = parent[static_cast<std::size_t>(v)]) {
    out.steps.push_back(via[static_cast<std::size_t>(v)]);
  }
  std::reverse(out.steps.begin(), out.steps.end());
  out.per_listener_trace.assign(problem.listeners.size(), {});
  for (const auto& st : out.steps) {
    out.total_time += st.dt;
    out.total_noise_cost += st.noise * st.dt;
    out.total_cost += st.cost;
    const auto db = field.node_noise(st.cell, problem.actions[st.action]);
    for (std::size_t j = 0; j < db.size(); ++j) out.per_listener_trace[j].push_back(db[j]);
  }
  return out;
}

std::vector<std::vector<double>> simulate_plan_audio(const PlanProblem& problem,
                                                     const Plan& p, const AcousticConfig& cfg,
                                                     std::uint64_t seed) {
  problem.validate();
  const auto& g = problem.world->grid;
  std::vector<std::vector<double>> out(problem.listeners.size());
  for (std::size_t j = 0; j < problem.listeners.size(); ++j) {
    for (std::size_t i = 0; i < p.steps.size(); ++i) {
      const auto& st = p.steps[i];
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(g.index(st.cell)) * 131 + j));
      const auto h = trace_impulse(*problem.world, g.center(st.cell),
                                   problem.listeners[j].pose, cfg, rng);
      out[j].push_back(
          scale_action_db(histogram_to_label(h).y, problem.actions[st.action].source_db));
    }
  }
  return out;
}

std::vector<ActionProfile> default_actions() {
  return {{"slow", 0.3, 64.0}, {"normal", 0.6, 70.0}, {"fast", 1.0, 76.0}, {"run", 2.0, 98.0}};
}

std::vector<ActionProfile> parse_actions(const std::string& text) {
  try {
    const auto j = json::parse(text);
    if (!j.is_array() || j.empty()) throw DataError("actions must be a non-empty array");
    std::vector<ActionProfile> out;
    for (const auto& e : j) {
      ActionProfile a{e.at("name").get<std::string>(), e.at("speed").get<double>(),
                      e.at("source_db").get<double>()};
      if (!(a.speed > 0.0) || !(a.source_db > 0.0 && a.source_db <= kDbCeiling)) {
        throw DataError("action '" + a.name + "' has an invalid speed or source_db");
      }
      out.push_back(std::move(a));
    }
    return out;
  } catch (const json::exception& e) {
    throw DataError(std::string("bad actions file: ") + e.what());
  }
}

std::vector<ActionProfile> load_actions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open actions file " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  try {
    return parse_actions(s.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string plan_to_json(const PlanProblem& problem, const Plan& p) {
  const auto& g = problem.world->grid;
  json steps = json::array();
  for (std::size_t i = 0; i < p.steps.size(); ++i) {
    const auto& s = p.steps[i];
    const auto c = g.center(s.cell);
    json db = json::array();
    for (const auto& trace : p.per_listener_trace) db.push_back(trace[i]);
    steps.push_back({{"cell", {s.cell.x, s.cell.y}},
                     {"pose", {c.x, c.y}},
                     {"action", problem.actions[s.action].name},
                     {"dt", s.dt},
                     {"noise", s.noise},
                     {"cost", s.cost},
                     {"listener_db", std::move(db)}});
  }
  const auto sc = g.center(p.start);
  json j{{"map_id", g.id()},
         {"lambda", problem.lambda},
         {"start", {sc.x, sc.y}},
         {"steps", std::move(steps)},
         {"total_time", p.total_time},
         {"total_noise_cost", p.total_noise_cost},
         {"total_cost", p.total_cost}};
  return j.dump(2) + "\n";
}

}  // namespace anavi
