#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "planner_oracle.hpp"

#include "anavi/acousticmap.hpp"
#include "anavi/error.hpp"
#include "anavi/planner.hpp"

#include "json.hpp"

using namespace anavi;
using testing::fixture;

namespace {

const std::vector<ActionProfile> kActions{
    {"slow", 0.3, 64.0}, {"normal", 0.6, 70.0}, {"fast", 1.0, 76.0}, {"run", 2.0, 98.0}};

PlanProblem problem(const WorldMap& w, const PredictorModel& m, Cell s, Cell g,
                    std::vector<Listener> listeners, double lambda) {
  PlanProblem p;
  p.world = &w;
  p.model = &m;
  p.start = w.grid.center(s);
  p.goal = w.grid.center(g);
  p.listeners = std::move(listeners);
  p.actions = kActions;
  p.lambda = lambda;
  return p;
}

void check_invariants(const PlanProblem& p, const Plan& plan) {
  const auto& g = p.world->grid;
  const auto cells = plan.cells();
  CHECK(cells.front() == g.cell_at(p.start));
  CHECK(cells.back() == g.cell_at(p.goal));
  double t = 0, n = 0, c = 0;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    CHECK(std::abs(cells[i].x - cells[i - 1].x) <= 1);
    CHECK(std::abs(cells[i].y - cells[i - 1].y) <= 1);
    const auto& st = plan.steps[i - 1];
    CHECK(st.cost == doctest::Approx(edge_cost(p, cells[i - 1], cells[i],
                                               p.actions[st.action])).epsilon(1e-12));
    t += st.dt;
    n += st.noise * st.dt;
    c += st.cost;
  }
  CHECK(std::abs(plan.total_time - t) <= 1e-9);
  CHECK(std::abs(plan.total_noise_cost - n) <= 1e-9);
  CHECK(std::abs(plan.total_cost - c) <= 1e-9);
  CHECK(plan.per_listener_trace.size() == p.listeners.size());
  for (const auto& tr : plan.per_listener_trace) CHECK(tr.size() == plan.steps.size());
}

}  // namespace

TEST_CASE("node noise") {
  const auto w = fixture("tworoom");
  const auto h = make_heuristic();
  auto p = problem(w, h, {2, 2}, {3, 3}, {}, 1.0);
  CHECK(node_noise(p, {5, 5}, kActions[2]).empty());
  const Pose2 c = w.grid.center({5, 5});
  p.listeners = {{{c.x + 1.0, c.y}, 1.0, 0.0}};
  CHECK(node_noise(p, {5, 5}, kActions[2])[0] == doctest::Approx(120.0 / 128 * 76));
  // beyond the model support
  const auto far = fixture("freefield");
  auto q = problem(far, h, {2, 2}, {3, 3}, {{far.grid.center({70, 2}), 1.0, 0.0}}, 1.0);
  CHECK(node_noise(q, {2, 2}, kActions[3])[0] == 0.0);
  CHECK_THROWS_AS(node_noise(p, {0, 0}, kActions[0]), UsageError);
}

TEST_CASE("edge cost arithmetic") {
  const auto w = fixture("freefield");
  const auto h = make_heuristic();
  CHECK(edge_cost(0.25, 66.64, 0.1) == doctest::Approx(1.916));
  auto p = problem(w, h, {2, 2}, {3, 3}, {}, 0.0);
  const auto fast = kActions[2];
  CHECK(edge_cost(p, {10, 10}, {11, 10}, fast) == 0.25);
  CHECK(edge_cost(p, {10, 10}, {11, 11}, fast) == doctest::Approx(0.25 * std::sqrt(2.0)));
  CHECK_THROWS_AS(edge_cost(p, {10, 10}, {12, 10}, fast), UsageError);
  p.lambda = 3.0;
  p.listeners = {{w.grid.center({40, 40}), 2.0, 200.0}};
  CHECK(edge_cost(p, {10, 10}, {11, 10}, fast) == 0.25);
}

TEST_CASE("no corner cutting") {
  const auto w = fixture("plan6");
  const auto h = make_heuristic();
  auto p = problem(w, h, {0, 0}, {0, 0}, {}, 0.0);
  // (0,1) -> (1,2): (1,1) is solid
  CHECK_THROWS_AS(edge_cost(p, {0, 1}, {1, 2}, kActions[0]), UsageError);
  for (const auto& n : neighbours(w.grid, {0, 1})) CHECK_FALSE((n.x == 1 && n.y == 2));
}

TEST_CASE("plans match brute force on small fixtures") {
  const auto h = make_heuristic();
  int checked = 0;
  for (const char* name : {"plan5", "plan6", "plan8", "air3"}) {
    const auto w = fixture(name);
    const auto free = w.grid.traversable_cells();
    Rng rng(17);
    for (int trial = 0; trial < 6; ++trial) {
      const Cell s = free[rng.below(free.size())];
      const Cell t = free[rng.below(free.size())];
      std::vector<Listener> ls;
      for (int k = 0; k < 1 + trial % 3; ++k) {
        ls.push_back({w.grid.center(free[rng.below(free.size())]), rng.uniform(0.2, 2.0),
                      rng.uniform(0.0, 80.0)});
      }
      for (double lambda : {0.0, 0.01, 0.2, 5.0}) {
        const auto p = problem(w, h, s, t, ls, lambda);
        const auto result = plan(p);
        CAPTURE(name);
        CAPTURE(lambda);
        CHECK(result.total_cost == doctest::Approx(testing::brute_force_cost(p)).epsilon(1e-9));
        if (lambda == 0.0) {
          CHECK(result.total_time == doctest::Approx(testing::shortest_time(p)).epsilon(1e-12));
          for (const auto& st : result.steps) CHECK(p.actions[st.action].name == "run");
        }
        check_invariants(p, result);
        ++checked;
      }
    }
  }
  CHECK(checked == 96);
}

TEST_CASE("start equal to goal") {
  const auto w = fixture("plan5");
  const auto h = make_heuristic();
  const auto r = plan(problem(w, h, {0, 0}, {0, 0}, {{w.grid.center({4, 4})}}, 1.0));
  CHECK(r.steps.empty());
  CHECK(r.total_cost == 0.0);
  CHECK(r.cells().size() == 1);
}

TEST_CASE("unreachable goal") {
  auto w = parse_map(R"({"id":"split","cell_size":0.25,"width":5,"height":3,
    "materials":[{"code":1,"name":"wall","absorption":0.1}],
    "rows":["00100","00100","00100"]})");
  const auto h = make_heuristic();
  CHECK_THROWS_AS(plan(problem(w, h, {0, 0}, {4, 2}, {}, 0.0)), NoPathError);
  CHECK_THROWS_AS(plan(problem(w, h, {0, 0}, {2, 1}, {}, 0.0)), UsageError);
}

TEST_CASE("lambda sweep is monotone") {
  const auto w = fixture("tworoom");
  const auto h = make_heuristic();
  std::vector<Listener> ls{{w.grid.center({5, 10}), 1.0, 60.0}};
  double prev_time = 0.0, prev_noise = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0}) {
    const auto r = plan(problem(w, h, {3, 3}, {3, 16}, ls, lambda));
    CHECK(r.total_time >= prev_time - 1e-12);
    CHECK(r.total_noise_cost <= prev_noise + 1e-12);
    prev_time = r.total_time;
    prev_noise = r.total_noise_cost;
  }
}

TEST_CASE("scaling weights and lambda inversely keeps the plan") {
  const auto w = fixture("apartment");
  const auto h = make_heuristic();
  const auto free = w.grid.traversable_cells();
  Rng rng(3);
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<Listener> ls{{w.grid.center(free[rng.below(free.size())]), 1.5, 50.0},
                             {w.grid.center(free[rng.below(free.size())]), 0.5, 40.0}};
    const Cell s = free[rng.below(free.size())], t = free[rng.below(free.size())];
    const auto a = plan(problem(w, h, s, t, ls, 0.08));
    for (auto& l : ls) l.weight *= 4.0;
    const auto b = plan(problem(w, h, s, t, ls, 0.02));
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
      CHECK(a.steps[i].cell == b.steps[i].cell);
      CHECK(a.steps[i].action == b.steps[i].action);
    }
  }
}

TEST_CASE("planner noise matches the fixed listener raster") {
  const auto w = fixture("tworoom");
  const auto h = make_heuristic();
  const Pose2 lp = w.grid.center({8, 9});
  auto p = problem(w, h, {3, 3}, {3, 16}, {{lp, 1.0, 0.0}}, 1.0);
  const auto raster = fixed_listener_map(w, lp, h);
  NoiseField field(p);
  for (const auto& c : w.grid.traversable_cells()) {
    CHECK(field.node_noise(c, kActions[1])[0] == scale_action_db(*raster.at(c), 70.0));
  }
}

TEST_CASE("simulated audio") {
  const auto h = make_heuristic();
  SUBCASE("enclosed listener hears nothing") {
    const auto w = fixture("enclosed");
    const auto p = problem(w, h, {2, 2}, {2, 15}, {{w.grid.center({13, 7})}}, 0.0);
    const auto r = plan(p);
    const auto sim = simulate_plan_audio(p, r, AcousticConfig{}, 1);
    REQUIRE(sim[0].size() == r.steps.size());
    for (double db : sim[0]) CHECK(db == 0.0);
  }
  SUBCASE("free field trace follows the prediction") {
    const auto w = fixture("freefield");
    const auto p = problem(w, h, {30, 30}, {50, 34}, {{w.grid.center({40, 40})}}, 0.0);
    const auto r = plan(p);
    const auto sim = simulate_plan_audio(p, r, AcousticConfig{}, 1);
    for (std::size_t i = 0; i < sim[0].size(); ++i) {
      CHECK(std::abs(sim[0][i] - r.per_listener_trace[0][i]) <= 1.5);
    }
  }
}

TEST_CASE("actions and plan json") {
  const auto actions = load_actions(std::string(ANAVI_DATA_DIR) + "/actions.json");
  REQUIRE(actions.size() == 4);
  CHECK(actions[2].source_db == 76.0);
  CHECK(actions[3].source_db == 98.0);
  const auto defaults = default_actions();
  REQUIRE(defaults.size() == actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    CHECK(defaults[i].name == actions[i].name);
    CHECK(defaults[i].speed == actions[i].speed);
    CHECK(defaults[i].source_db == actions[i].source_db);
  }
  CHECK_THROWS_AS(parse_actions(R"([{"name":"x","speed":0,"source_db":50}])"), DataError);
  CHECK_THROWS_AS(parse_actions("[]"), DataError);

  const auto w = fixture("plan5");
  const auto h = make_heuristic();
  const auto p = problem(w, h, {0, 0}, {4, 4}, {{w.grid.center({0, 4})}}, 0.5);
  const auto j = nlohmann::json::parse(plan_to_json(p, plan(p)));
  CHECK(j["steps"].size() > 0);
  CHECK(j["steps"][0]["listener_db"].size() == 1);
  CHECK(j.contains("total_cost"));
}
