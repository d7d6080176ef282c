#include "anavi/mapgen.hpp"

#include <algorithm>

#include "anavi/rng.hpp"

namespace anavi {

namespace {

enum Code : int {
  kConcrete = 1,
  kBrick = 2,
  kDrywall = 3,
  kWood = 4,
  kGlass = 5,
  kCurtain = 6,
  kPanel = 7,
};

struct Rect {
  int x0, y0, x1, y1;  // inclusive interior bounds
  int w() const { return x1 - x0 + 1; }
  int h() const { return y1 - y0 + 1; }
};

class Builder {
 public:
  Builder(int w, int h, Rng& rng, const FloorplanConfig& cfg)
      : w_(w), h_(h), cells_(static_cast<std::size_t>(w * h), 0), rng_(rng), cfg_(cfg) {}

  void set(int x, int y, int code) { cells_[static_cast<std::size_t>(y * w_ + x)] = code; }
  int get(int x, int y) const { return cells_[static_cast<std::size_t>(y * w_ + x)]; }

  int pick(std::initializer_list<int> codes) {
    return *(codes.begin() + rng_.below(codes.size()));
  }

  void border() {
    const int outer = pick({kConcrete, kConcrete, kBrick, kGlass});
    for (int x = 0; x < w_; ++x) {
      set(x, 0, outer);
      set(x, h_ - 1, outer);
    }
    for (int y = 0; y < h_; ++y) {
      set(0, y, outer);
      set(w_ - 1, y, outer);
    }
  }

  void split(const Rect& r, int depth) {
    const bool can_x = r.w() >= 2 * cfg_.min_room + 1;
    const bool can_y = r.h() >= 2 * cfg_.min_room + 1;
    if ((!can_x && !can_y) || (depth >= 2 && rng_.uniform() < 0.3)) {
      rooms_.push_back(r);
      return;
    }
    bool vertical = can_x && (!can_y || (r.w() >= r.h() ? rng_.uniform() < 0.75
                                                         : rng_.uniform() < 0.25));
    const int code = pick({kDrywall, kDrywall, kBrick, kWood, kGlass, kConcrete});
    if (vertical) {
      const int at = r.x0 + cfg_.min_room +
                     static_cast<int>(rng_.below(static_cast<std::uint64_t>(r.w() - 2 * cfg_.min_room)));
      for (int y = r.y0; y <= r.y1; ++y) set(at, y, code);
      doors(r.y0, r.y1, [&](int y) { set(at, y, 0); });
      split({r.x0, r.y0, at - 1, r.y1}, depth + 1);
      split({at + 1, r.y0, r.x1, r.y1}, depth + 1);
    } else {
      const int at = r.y0 + cfg_.min_room +
                     static_cast<int>(rng_.below(static_cast<std::uint64_t>(r.h() - 2 * cfg_.min_room)));
      for (int x = r.x0; x <= r.x1; ++x) set(x, at, code);
      doors(r.x0, r.x1, [&](int x) { set(x, at, 0); });
      split({r.x0, r.y0, r.x1, at - 1}, depth + 1);
      split({r.x0, at + 1, r.x1, r.y1}, depth + 1);
    }
  }

  // One or two door gaps of 1-1.5 m; occasionally a wide opening.
  template <typename Open>
  void doors(int lo, int hi, Open&& open) {
    const int span = hi - lo + 1;
    const int count = rng_.uniform() < 0.3 ? 2 : 1;
    for (int d = 0; d < count; ++d) {
      int width = 4 + static_cast<int>(rng_.below(3));
      if (rng_.uniform() < 0.1) width = span / 2;
      const int start = lo + 1 + static_cast<int>(rng_.below(
                                      static_cast<std::uint64_t>(std::max(1, span - width - 2))));
      for (int i = start; i < std::min(hi, start + width); ++i) open(i);
    }
  }

  void furnish() {
    for (const auto& r : rooms_) {
      int pieces = 0;
      while (pieces < 3 && rng_.uniform() < cfg_.furniture_rate) {
        ++pieces;
        const int fw = 2 + static_cast<int>(rng_.below(5));
        const int fh = 2 + static_cast<int>(rng_.below(4));
        // Keep two free cells between furniture and walls so doors stay open.
        if (r.w() < fw + 6 || r.h() < fh + 6) break;
        const int x = r.x0 + 2 + static_cast<int>(rng_.below(static_cast<std::uint64_t>(r.w() - fw - 3)));
        const int y = r.y0 + 2 + static_cast<int>(rng_.below(static_cast<std::uint64_t>(r.h() - fh - 3)));
        const int code = pick({kWood, kWood, kCurtain, kPanel, kBrick});
        for (int yy = y; yy < y + fh; ++yy) {
          for (int xx = x; xx < x + fw; ++xx) set(xx, yy, code);
        }
      }
    }
  }

  std::vector<int> take() { return std::move(cells_); }

 private:
  int w_, h_;
  std::vector<int> cells_;
  Rng& rng_;
  const FloorplanConfig& cfg_;
  std::vector<Rect> rooms_;
};

}  // namespace

MaterialTable standard_materials() {
  return MaterialTable({{kConcrete, "concrete", 0.02},
                        {kBrick, "brick", 0.05},
                        {kDrywall, "drywall", 0.12},
                        {kWood, "wood", 0.25},
                        {kGlass, "glass", 0.04},
                        {kCurtain, "curtain", 0.55},
                        {kPanel, "acoustic_panel", 0.85}});
}

WorldMap generate_floorplan(const std::string& id, std::uint64_t seed,
                            const FloorplanConfig& cfg) {
  Rng rng(mix64(seed));
  const auto span = static_cast<std::uint64_t>(cfg.max_size - cfg.min_size + 1);
  const int w = cfg.min_size + static_cast<int>(rng.below(span));
  const int h = cfg.min_size + static_cast<int>(rng.below(span));
  Builder b(w, h, rng, cfg);
  b.border();
  b.split({1, 1, w - 2, h - 2}, 0);
  b.furnish();
  return {GridMap(id, w, h, 0.25, b.take()), standard_materials()};
}

}  // namespace anavi
