#include "anavi/acoustics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "anavi/error.hpp"

namespace anavi {

double ImpulseHistogram::peak() const {
  return bins.empty() ? 0.0 : *std::max_element(bins.begin(), bins.end());
}

double ImpulseHistogram::total() const {
  return std::accumulate(bins.begin(), bins.end(), 0.0);
}

void AcousticConfig::validate() const {
  if (n_rays < 1) throw UsageError("n_rays must be >= 1");
  if (max_bounces < 0) throw UsageError("max_bounces must be >= 0");
  if (!(listener_radius > 0.0)) throw UsageError("listener_radius must be > 0");
  if (!(air_density > 0.0) || !(sound_speed > 0.0) || !(bin_width > 0.0) ||
      !(max_time > 0.0) || !(energy_floor > 0.0)) {
    throw UsageError("acoustic constants must be positive");
  }
}

DbLabel intensity_to_label(double intensity) {
  // NaN compares false everywhere; treat it as silence.
  double clipped = intensity >= kIntensityFloor ? intensity : kIntensityFloor;
  clipped = std::min(clipped, kIntensityCeiling);
  DbLabel out;
  out.db_max = std::clamp(10.0 * std::log10(clipped) + 120.0, 0.0, kDbCeiling);
  out.y = out.db_max / kDbCeiling;
  return out;
}

DbLabel histogram_to_label(const ImpulseHistogram& h) {
  return intensity_to_label(h.peak());
}

DbLabel heuristic_db(double r) {
  if (!(r > 0.0)) throw UsageError("heuristic_db: distance must be > 0");
  DbLabel out;
  out.db_max = std::clamp(-20.0 * std::log10(r) + 120.0, 0.0, kDbCeiling);
  out.y = out.db_max / kDbCeiling;
  return out;
}

double scale_action_db(double y, double source_db) {
  if (!(y >= 0.0 && y <= 1.0)) throw UsageError("scale_action_db: y outside [0,1]");
  if (!(source_db > 0.0)) throw UsageError("scale_action_db: source_db must be > 0");
  return y * source_db;
}

namespace {

class Tracer {
 public:
  Tracer(const WorldMap& world, const Pose2& listener, const AcousticConfig& cfg,
         ImpulseHistogram& hist)
      : grid_(world.grid),
        cs_(world.grid.cell_size()),
        listener_(listener),
        cfg_(cfg),
        hist_(hist),
        r2_(cfg.listener_radius * cfg.listener_radius),
        max_path_(cfg.max_time * cfg.sound_speed),
        weight_(M_PI / (static_cast<double>(cfg.n_rays) * cfg.listener_radius)) {
    reflectivity_.resize(grid_.cells().size());
    for (std::size_t i = 0; i < reflectivity_.size(); ++i) {
      const int code = grid_.cells()[i];
      reflectivity_[i] = code == 0 ? 1.0 : 1.0 - world.materials.absorption(code);
    }
  }

  void deposit(double path_length, double intensity) {
    const double t = path_length / cfg_.sound_speed;
    auto bin = static_cast<std::size_t>(t / cfg_.bin_width);
    if (bin >= hist_.bins.size()) return;
    hist_.bins[bin] += intensity;
    ++hist_.total_paths;
  }

  void trace_ray(const Pose2& origin, Cell cell, double dx, double dy) {
    double px = origin.x, py = origin.y;
    double k = 1.0;
    double travelled = 0.0;
    for (int bounce = 0;; ++bounce) {
      // March to the next solid face or the map edge.
      const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
      const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
      constexpr double inf = std::numeric_limits<double>::infinity();
      double t_max_x = step_x == 0 ? inf
                                   : (((step_x > 0 ? cell.x + 1 : cell.x) * cs_) - px) / dx;
      double t_max_y = step_y == 0 ? inf
                                   : (((step_y > 0 ? cell.y + 1 : cell.y) * cs_) - py) / dy;
      const double t_delta_x = step_x == 0 ? inf : cs_ / std::abs(dx);
      const double t_delta_y = step_y == 0 ? inf : cs_ / std::abs(dy);

      bool flip_x = false, flip_y = false, escaped = false;
      double t_hit = 0.0;
      while (true) {
        if (std::abs(t_max_x - t_max_y) <= 1e-12) {
          const Cell nx{cell.x + step_x, cell.y};
          const Cell ny{cell.x, cell.y + step_y};
          const Cell nd{cell.x + step_x, cell.y + step_y};
          if (!grid_.in_bounds(nx) || !grid_.in_bounds(ny) || !grid_.in_bounds(nd)) {
            escaped = true;
            t_hit = t_max_x;
            break;
          }
          const bool sx = grid_.code(nx) != 0;
          const bool sy = grid_.code(ny) != 0;
          const bool sd = grid_.code(nd) != 0;
          if (sx || sy || sd) {
            t_hit = t_max_x;
            flip_x = sx || !sy;
            flip_y = sy || !sx;
            hit_cell_ = sx ? nx : (sy ? ny : nd);
            break;
          }
          cell = nd;
          t_max_x += t_delta_x;
          t_max_y += t_delta_y;
        } else if (t_max_x < t_max_y) {
          const Cell next{cell.x + step_x, cell.y};
          if (!grid_.in_bounds(next)) {
            escaped = true;
            t_hit = t_max_x;
            break;
          }
          if (grid_.code(next) != 0) {
            t_hit = t_max_x;
            flip_x = true;
            hit_cell_ = next;
            break;
          }
          cell = next;
          t_max_x += t_delta_x;
        } else {
          const Cell next{cell.x, cell.y + step_y};
          if (!grid_.in_bounds(next)) {
            escaped = true;
            t_hit = t_max_y;
            break;
          }
          if (grid_.code(next) != 0) {
            t_hit = t_max_y;
            flip_y = true;
            hit_cell_ = next;
            break;
          }
          cell = next;
          t_max_y += t_delta_y;
        }
        if (travelled + std::min(t_max_x, t_max_y) > max_path_) {
          escaped = true;
          t_hit = std::min(t_max_x, t_max_y);
          break;
        }
      }

      // The direct (unreflected) segment is covered by the deterministic term.
      if (bounce > 0) capture(px, py, dx, dy, t_hit, travelled, k);

      travelled += t_hit;
      if (escaped || bounce >= cfg_.max_bounces || travelled > max_path_) return;
      px += dx * t_hit;
      py += dy * t_hit;
      k *= reflectivity_[static_cast<std::size_t>(grid_.index(hit_cell_))];
      if (k < cfg_.energy_floor) return;
      if (flip_x) dx = -dx;
      if (flip_y) dy = -dy;
    }
  }

 private:
  void capture(double px, double py, double dx, double dy, double length,
               double travelled, double k) {
    const double vx = listener_.x - px;
    const double vy = listener_.y - py;
    const double along = std::clamp(vx * dx + vy * dy, 0.0, length);
    const double ex = vx - along * dx;
    const double ey = vy - along * dy;
    if (ex * ex + ey * ey > r2_) return;
    const double d = std::max(travelled + along, cfg_.listener_radius);
    deposit(d, k * weight_ / d);
  }

  const GridMap& grid_;
  double cs_;
  Pose2 listener_;
  const AcousticConfig& cfg_;
  ImpulseHistogram& hist_;
  double r2_;
  double max_path_;
  double weight_;
  std::vector<double> reflectivity_;
  Cell hit_cell_{};
};

}  // namespace

ImpulseHistogram trace_impulse(const WorldMap& world, const Pose2& source,
                               const Pose2& listener, const AcousticConfig& cfg,
                               Rng& rng) {
  cfg.validate();
  const auto& grid = world.grid;
  if (!grid.in_bounds(source) || !is_traversable(grid, source)) {
    throw UsageError("trace_impulse: source is not traversable");
  }
  if (!grid.in_bounds(listener) || !is_traversable(grid, listener)) {
    throw UsageError("trace_impulse: listener is not traversable");
  }

  ImpulseHistogram hist;
  hist.bin_width = cfg.bin_width;
  hist.bins.assign(static_cast<std::size_t>(std::ceil(cfg.max_time / cfg.bin_width - 1e-9)),
                   0.0);
  Tracer tracer(world, listener, cfg, hist);

  if (line_of_sight(grid, source, listener)) {
    const double d = std::max(distance(source, listener), cfg.listener_radius);
    tracer.deposit(d, AcousticConfig::source_intensity / (d * d));
  }

  const Cell start = grid.cell_at(source);
  const double spacing = 2.0 * M_PI / cfg.n_rays;
  const double jitter = rng.uniform() * spacing;
  for (int i = 0; i < cfg.n_rays; ++i) {
    const double angle = jitter + i * spacing;
    tracer.trace_ray(source, start, std::cos(angle), std::sin(angle));
  }
  return hist;
}

void write_histogram_csv(const std::filesystem::path& path,
                         const ImpulseHistogram& h) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "time_bin_s,intensity\n";
  out.precision(17);
  for (std::size_t i = 0; i < h.bins.size(); ++i) {
    out << static_cast<double>(i) * h.bin_width << ',' << h.bins[i] << '\n';
  }
}

}  // namespace anavi
