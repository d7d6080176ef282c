#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "anavi/acoustics.hpp"
#include "anavi/error.hpp"
#include "fixtures.hpp"

using namespace anavi;
using anavi::testing::fixture;

namespace {

ImpulseHistogram trace(const WorldMap& w, Pose2 s, Pose2 l, std::uint64_t seed,
                       AcousticConfig cfg = {}) {
  Rng rng(seed);
  return trace_impulse(w, s, l, cfg, rng);
}

double db_of(const ImpulseHistogram& h) { return histogram_to_label(h).db_max; }

}  // namespace

TEST_CASE("dB label anchors") {
  auto one = intensity_to_label(1.0);
  CHECK(one.db_max == doctest::Approx(120.0).epsilon(1e-15));
  CHECK(one.y == doctest::Approx(0.9375).epsilon(1e-15));

  auto floor = intensity_to_label(1e-12);
  CHECK(floor.db_max == doctest::Approx(0.0));
  CHECK(floor.y == 0.0);
  CHECK(intensity_to_label(0.0).db_max == 0.0);
  CHECK(intensity_to_label(1e-30).y == 0.0);

  auto loud = intensity_to_label(10.0);
  CHECK(loud.db_max == doctest::Approx(128.0).epsilon(1e-15));
  CHECK(loud.y == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(intensity_to_label(std::pow(10.0, 0.8)).y == doctest::Approx(1.0));

  ImpulseHistogram zero;
  zero.bins.assign(200, 0.0);
  CHECK(histogram_to_label(zero).y == 0.0);

  ImpulseHistogram peaked;
  peaked.bins = {0.0, 0.25, 1.0, 0.5};
  CHECK(histogram_to_label(peaked).db_max == doctest::Approx(120.0));
}

TEST_CASE("histogram_to_label is monotone and total") {
  Rng rng(8);
  double prev_db = -1.0;
  for (int e = -150; e <= 20; ++e) {
    const double intensity = std::pow(10.0, e / 10.0);
    const auto label = intensity_to_label(intensity);
    CHECK(label.db_max >= prev_db);
    CHECK(label.y >= 0.0);
    CHECK(label.y <= 1.0);
    CHECK(label.y == label.db_max / 128.0);
    prev_db = label.db_max;
  }
  const auto nan_label = intensity_to_label(std::nan(""));
  CHECK(nan_label.y == 0.0);
  CHECK(intensity_to_label(INFINITY).y == 1.0);
}

TEST_CASE("heuristic dB anchors") {
  CHECK(heuristic_db(1.0).db_max == 120.0);
  CHECK(heuristic_db(10.0).db_max == doctest::Approx(100.0).epsilon(1e-15));
  CHECK(heuristic_db(0.1).db_max == 128.0);
  CHECK(heuristic_db(1.0).y == 0.9375);
  CHECK_THROWS_AS(heuristic_db(0.0), UsageError);
  CHECK_THROWS_AS(heuristic_db(-2.0), UsageError);
}

TEST_CASE("action loudness scaling") {
  CHECK(scale_action_db(0.68, 76.0) == doctest::Approx(51.68).epsilon(1e-12));
  CHECK(scale_action_db(0.68, 98.0) == doctest::Approx(66.64).epsilon(1e-12));
  CHECK(scale_action_db(0.0, 76.0) == 0.0);
  CHECK_THROWS_AS(scale_action_db(1.2, 76.0), UsageError);
  CHECK_THROWS_AS(scale_action_db(0.5, 0.0), UsageError);
}

TEST_CASE("free field at 1 m is 120 dB") {
  const auto w = fixture("freefield");
  const Pose2 s = w.grid.center({40, 40});
  const Pose2 l{s.x + 1.0, s.y};
  const auto h = trace(w, s, l, 1);
  CHECK(h.bins.size() == 200);
  CHECK(h.total() == doctest::Approx(1.0).epsilon(0.03));
  CHECK(db_of(h) == doctest::Approx(120.0).epsilon(1e-9));
}

TEST_CASE("free field decay follows the inverse square law") {
  const auto w = fixture("freefield");
  const Pose2 s = w.grid.center({10, 40});
  for (double d : {1.0, 2.0, 4.0, 8.0}) {
    const auto h = trace(w, s, {s.x + d, s.y}, 3);
    CHECK(std::abs(db_of(h) - heuristic_db(d).db_max) <= 1.5);
  }
}

TEST_CASE("source at listener clamps distance and dB") {
  const auto w = fixture("freefield");
  const Pose2 s = w.grid.center({40, 40});
  const auto h = trace(w, s, s, 1);
  CHECK(h.peak() == doctest::Approx(16.0));
  CHECK(histogram_to_label(h).db_max == 128.0);
}

TEST_CASE("enclosed listener hears nothing") {
  const auto w = fixture("enclosed");
  const Pose2 s = w.grid.center({3, 3});
  const Pose2 l = w.grid.center({13, 7});
  const auto h = trace(w, s, l, 1);
  CHECK(h.total() == 0.0);
  CHECK(h.total_paths == 0);
  CHECK(histogram_to_label(h).y == 0.0);
}

TEST_CASE("single reflection matches the image source") {
  // Wall occupies row 20 (y in [5.0, 5.25)); both points sit below it.
  const auto w = fixture("singlewall");
  const double a = w.materials.absorption(1);
  const Pose2 s{5.0, 3.0};
  const Pose2 l{9.0, 3.5};
  const Pose2 image{s.x, 2 * 5.0 - s.y};
  const double d_image = distance(image, l);
  const double direct = 1.0 / std::pow(distance(s, l), 2);

  double reflected = 0.0;
  const int seeds = 8;
  for (int seed = 0; seed < seeds; ++seed) {
    reflected += trace(w, s, l, static_cast<std::uint64_t>(seed)).total() - direct;
  }
  reflected /= seeds;
  const double expected = (1.0 - a) / (d_image * d_image);
  CHECK(reflected == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("direct term is reciprocal") {
  const auto w = fixture("apartment");
  AcousticConfig direct_only;
  direct_only.max_bounces = 0;
  const auto cells = w.grid.traversable_cells();
  Rng pick(4);
  for (int i = 0; i < 50; ++i) {
    const Pose2 a = w.grid.center(cells[pick.below(cells.size())]);
    const Pose2 b = w.grid.center(cells[pick.below(cells.size())]);
    const auto ab = trace(w, a, b, 1, direct_only);
    const auto ba = trace(w, b, a, 2, direct_only);
    CHECK(ab.bins == ba.bins);
  }
}

TEST_CASE("tracing is deterministic") {
  const auto w = fixture("apartment");
  const Pose2 s = w.grid.center({5, 5});
  const Pose2 l = w.grid.center({30, 20});
  const auto a = trace(w, s, l, 77);
  const auto b = trace(w, s, l, 77);
  CHECK(a.bins == b.bins);
  CHECK(a.total_paths == b.total_paths);
}

TEST_CASE("raising absorption never increases any bin") {
  Rng gen(123);
  for (int trial = 0; trial < 12; ++trial) {
    const int wd = 24, ht = 20;
    std::vector<int> cells(wd * ht, 0);
    for (int y = 0; y < ht; ++y) {
      for (int x = 0; x < wd; ++x) {
        const bool edge = x == 0 || y == 0 || x == wd - 1 || y == ht - 1;
        if (edge || gen.uniform() < 0.12) cells[y * wd + x] = 1 + static_cast<int>(gen.below(3));
      }
    }
    cells[5 * wd + 5] = 0;
    cells[14 * wd + 18] = 0;
    WorldMap lo{GridMap("rand", wd, ht, 0.25, cells),
                MaterialTable({{1, "a", gen.uniform(0.0, 0.5)},
                               {2, "b", gen.uniform(0.0, 0.5)},
                               {3, "c", gen.uniform(0.0, 0.5)}})};
    WorldMap hi{lo.grid, lo.materials.transformed([&](int, double a) {
                  return std::min(1.0, a + gen.uniform(0.0, 0.5));
                })};
    AcousticConfig cfg;
    cfg.n_rays = 512;
    const Pose2 s = lo.grid.center({5, 5});
    const Pose2 l = lo.grid.center({18, 14});
    const auto h_lo = trace(lo, s, l, 1000 + trial, cfg);
    const auto h_hi = trace(hi, s, l, 1000 + trial, cfg);
    for (std::size_t i = 0; i < h_lo.bins.size(); ++i) {
      REQUIRE(h_hi.bins[i] <= h_lo.bins[i]);
    }
  }
}

TEST_CASE("trace rejects walls and bad configs") {
  const auto w = fixture("tworoom");
  Rng rng(1);
  CHECK_THROWS_AS(trace_impulse(w, w.grid.center({0, 0}), w.grid.center({5, 5}), {}, rng),
                  UsageError);
  CHECK_THROWS_AS(trace_impulse(w, w.grid.center({5, 5}), w.grid.center({20, 10}), {}, rng),
                  UsageError);
  AcousticConfig bad;
  bad.n_rays = 0;
  CHECK_THROWS_AS(trace_impulse(w, w.grid.center({5, 5}), w.grid.center({6, 5}), bad, rng),
                  UsageError);
}

TEST_CASE("histogram CSV export") {
  ImpulseHistogram h;
  h.bins = {0.0, 2.0, 0.5};
  const auto path = std::filesystem::temp_directory_path() / "anavi_hist.csv";
  write_histogram_csv(path, h);
  std::ifstream in(path);
  std::string header, first, second;
  std::getline(in, header);
  std::getline(in, first);
  std::getline(in, second);
  CHECK(header == "time_bin_s,intensity");
  CHECK(first == "0,0");
  CHECK(second == "0.001,2");
  std::filesystem::remove(path);
}
