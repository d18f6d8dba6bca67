#include "majutsu/placement.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace majutsu::placement {

using layout::SemanticClass;

std::string_view kind_name(PlacementKind kind) {
  return kind == PlacementKind::Tree ? "tree" : "streetlight";
}

void SamplingConfig::validate() const {
  if (!(radius_r > 0.0)) throw Error(ErrorCode::ConfigError, "radius_r", "must be > 0");
  if (!(roadside_spacing_s > 0.0)) throw Error(ErrorCode::ConfigError, "roadside_spacing_s", "must be > 0");
  if (!(roadside_offset_d >= 0.0)) throw Error(ErrorCode::ConfigError, "roadside_offset_d", "must be >= 0");
  if (max_attempts_k < 1) throw Error(ErrorCode::ConfigError, "max_attempts_k", "must be >= 1");
}

namespace {

class PoissonGrid {
 public:
  PoissonGrid(double width_m, double height_m, double radius)
      : cell_(radius / std::numbers::sqrt2), r2_(radius * radius) {
    nx_ = std::max(1, static_cast<int>(std::ceil(width_m / cell_)));
    ny_ = std::max(1, static_cast<int>(std::ceil(height_m / cell_)));
    slots_.assign(static_cast<std::size_t>(nx_) * ny_, -1);
  }

  bool free(Vec2 p, const std::vector<PlacementPoint>& pts) const {
    const int cx = cell_x(p), cy = cell_y(p);
    for (int y = std::max(0, cy - 2); y <= std::min(ny_ - 1, cy + 2); ++y) {
      for (int x = std::max(0, cx - 2); x <= std::min(nx_ - 1, cx + 2); ++x) {
        const int idx = slots_[static_cast<std::size_t>(y) * nx_ + x];
        if (idx < 0) continue;
        const Vec2 d = pts[static_cast<std::size_t>(idx)].position - p;
        if (dot(d, d) < r2_) return false;
      }
    }
    return true;
  }

  void insert(Vec2 p, int index) {
    slots_[static_cast<std::size_t>(cell_y(p)) * nx_ + cell_x(p)] = index;
  }

 private:
  int cell_x(Vec2 p) const { return std::clamp(static_cast<int>(p.x / cell_), 0, nx_ - 1); }
  int cell_y(Vec2 p) const { return std::clamp(static_cast<int>(p.y / cell_), 0, ny_ - 1); }

  double cell_;
  double r2_;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<int> slots_;
};

}  // namespace

std::vector<PlacementPoint> poisson_disk_sample(const Bitmask& mask, double mpp,
                                                const SamplingConfig& cfg) {
  cfg.validate();
  std::vector<PlacementPoint> points;
  std::vector<Pixel> candidates;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) candidates.push_back({x, y});
  if (candidates.empty()) return points;

  std::mt19937_64 rng(mix64(cfg.seed ^ 0x706f6973736f6eULL));
  for (std::size_t i = candidates.size(); i > 1; --i) {
    std::swap(candidates[i - 1], candidates[static_cast<std::size_t>(rng() % i)]);
  }

  const int h = mask.height();
  const double width_m = mask.width() * mpp, height_m = h * mpp;
  PoissonGrid grid(width_m, height_m, cfg.radius_r);
  auto on_mask = [&](Vec2 p) {
    if (p.x < 0.0 || p.y < 0.0 || p.x >= width_m || p.y >= height_m) return false;
    const Pixel px = pixel_at(p, h, mpp);
    return mask.contains(px.x, px.y) && mask.at(px.x, px.y) != 0;
  };
  auto accept = [&](Vec2 p) {
    grid.insert(p, static_cast<int>(points.size()));
    points.push_back({p, PlacementKind::Tree, PlacementSource::VegetationFill});
  };

  std::vector<std::size_t> active;
  for (const Pixel& seed_px : candidates) {
    const Vec2 corner{seed_px.x * mpp, (h - seed_px.y - 1) * mpp};
    const Vec2 seed{corner.x + unit_double(rng) * mpp, corner.y + unit_double(rng) * mpp};
    if (!on_mask(seed) || !grid.free(seed, points)) continue;
    accept(seed);
    active.push_back(points.size() - 1);
    while (!active.empty()) {
      const std::size_t slot = static_cast<std::size_t>(rng() % active.size());
      const Vec2 origin = points[active[slot]].position;
      bool spawned = false;
      for (int k = 0; k < cfg.max_attempts_k; ++k) {
        const double theta = 2.0 * std::numbers::pi * unit_double(rng);
        const double radius = cfg.radius_r * std::sqrt(1.0 + 3.0 * unit_double(rng));
        const Vec2 cand{origin.x + radius * std::cos(theta), origin.y + radius * std::sin(theta)};
        if (on_mask(cand) && grid.free(cand, points)) {
          accept(cand);
          active.push_back(points.size() - 1);
          spawned = true;
          break;
        }
      }
      if (!spawned) {
        active[slot] = active.back();
        active.pop_back();
      }
    }
  }
  return points;
}

namespace {

// Squared 1-D lower envelope of parabolas (Felzenszwalb & Huttenlocher).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -INFINITY;
  z[1] = INFINITY;
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      const int p = v[static_cast<std::size_t>(k)];
      s = ((f[static_cast<std::size_t>(q)] + static_cast<double>(q) * q) -
           (f[static_cast<std::size_t>(p)] + static_cast<double>(p) * p)) /
          (2.0 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[static_cast<std::size_t>(k)]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -INFINITY;
      z[1] = INFINITY;
      continue;
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k) + 1] = INFINITY;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(k) + 1] < q) ++k;
    const int p = v[static_cast<std::size_t>(k)];
    d[static_cast<std::size_t>(q)] =
        static_cast<double>(q - p) * (q - p) + f[static_cast<std::size_t>(p)];
  }
}

}  // namespace

Grid<double> distance_transform(const Bitmask& mask, double mpp) {
  const int w = mask.width(), h = mask.height();
  Grid<double> out(w, h, kFarDistance);
  if (count_set(mask) == 0) return out;
  constexpr double kBig = 1e20;
  Grid<double> sq(w, h, kBig);
  for (std::size_t i = 0; i < mask.size(); ++i) sq[i] = mask[i] ? 0.0 : kBig;

  const int n = std::max(w, h);
  std::vector<double> f(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n));
  std::vector<int> v(static_cast<std::size_t>(n));
  std::vector<double> z(static_cast<std::size_t>(n) + 1);
  for (int x = 0; x < w; ++x) {
    f.resize(static_cast<std::size_t>(h));
    d.resize(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = sq.at(x, y);
    edt_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) sq.at(x, y) = d[static_cast<std::size_t>(y)];
  }
  for (int y = 0; y < h; ++y) {
    f.resize(static_cast<std::size_t>(w));
    d.resize(static_cast<std::size_t>(w));
    for (int x = 0; x < w; ++x) f[static_cast<std::size_t>(x)] = sq.at(x, y);
    edt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) sq.at(x, y) = d[static_cast<std::size_t>(x)];
  }
  for (std::size_t i = 0; i < sq.size(); ++i) out[i] = std::sqrt(sq[i]) * mpp;
  return out;
}

double sample_grid(const Grid<double>& grid, Vec2 p, double mpp) {
  const Pixel px = pixel_at(p, grid.height(), mpp);
  const int x = std::clamp(px.x, 0, grid.width() - 1);
  const int y = std::clamp(px.y, 0, grid.height() - 1);
  return grid.at(x, y);
}

namespace {

// Marching squares over pixel centers. Crossing points are keyed by the grid
// edge they lie on so segments can be chained exactly.
struct IsoSegments {
  std::map<std::int64_t, Vec2> points;
  std::map<std::int64_t, std::vector<std::int64_t>> links;
};

IsoSegments marching_squares(const Grid<double>& field, double iso, double mpp) {
  const int w = field.width(), h = field.height();
  IsoSegments out;
  auto value = [&](int x, int y) { return field.at(x, y) - iso; };
  auto above = [&](int x, int y) { return value(x, y) >= 0.0; };
  auto center = [&](int x, int y) { return pixel_center(x, y, h, mpp); };
  auto h_edge = [&](int x, int y) { return 2 * (static_cast<std::int64_t>(y) * w + x); };
  auto v_edge = [&](int x, int y) { return 2 * (static_cast<std::int64_t>(y) * w + x) + 1; };
  auto crossing = [&](std::int64_t id, int ax, int ay, int bx, int by) {
    if (out.points.count(id)) return;
    const double fa = value(ax, ay), fb = value(bx, by);
    const double t = fa / (fa - fb);
    const Vec2 a = center(ax, ay), b = center(bx, by);
    out.points[id] = a + (b - a) * t;
  };
  auto link = [&](std::int64_t a, std::int64_t b) {
    out.links[a].push_back(b);
    out.links[b].push_back(a);
  };

  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      if (!std::isfinite(field.at(x, y)) || !std::isfinite(field.at(x + 1, y)) ||
          !std::isfinite(field.at(x, y + 1)) || !std::isfinite(field.at(x + 1, y + 1))) {
        continue;
      }
      // Corners: 0=(x,y) 1=(x+1,y) 2=(x+1,y+1) 3=(x,y+1); edges: top, right, bottom, left.
      const int code = (above(x, y) ? 1 : 0) | (above(x + 1, y) ? 2 : 0) |
                       (above(x + 1, y + 1) ? 4 : 0) | (above(x, y + 1) ? 8 : 0);
      if (code == 0 || code == 15) continue;
      const std::int64_t top = h_edge(x, y), bottom = h_edge(x, y + 1);
      const std::int64_t left = v_edge(x, y), right = v_edge(x + 1, y);
      auto edge_point = [&](std::int64_t e) {
        if (e == top) crossing(e, x, y, x + 1, y);
        else if (e == bottom) crossing(e, x, y + 1, x + 1, y + 1);
        else if (e == left) crossing(e, x, y, x, y + 1);
        else crossing(e, x + 1, y, x + 1, y + 1);
        return e;
      };
      auto seg = [&](std::int64_t a, std::int64_t b) { link(edge_point(a), edge_point(b)); };
      const double mid = 0.25 * (value(x, y) + value(x + 1, y) + value(x + 1, y + 1) + value(x, y + 1));
      switch (code) {
        case 1: case 14: seg(left, top); break;
        case 2: case 13: seg(top, right); break;
        case 3: case 12: seg(left, right); break;
        case 4: case 11: seg(right, bottom); break;
        case 6: case 9: seg(top, bottom); break;
        case 7: case 8: seg(left, bottom); break;
        case 5:
          if (mid >= 0.0) { seg(left, bottom); seg(top, right); }
          else { seg(left, top); seg(right, bottom); }
          break;
        case 10:
          if (mid >= 0.0) { seg(left, top); seg(right, bottom); }
          else { seg(left, bottom); seg(top, right); }
          break;
        default: break;
      }
    }
  }
  return out;
}

std::vector<std::pair<std::vector<Vec2>, bool>> chain_segments(const IsoSegments& iso) {
  std::vector<std::pair<std::vector<Vec2>, bool>> curves;
  std::map<std::int64_t, bool> visited;
  auto walk = [&](std::int64_t start) {
    std::vector<Vec2> poly;
    std::int64_t prev = -1, cur = start;
    bool closed = false;
    while (true) {
      visited[cur] = true;
      poly.push_back(iso.points.at(cur));
      const auto& nb = iso.links.at(cur);
      std::int64_t next = -1;
      for (auto cand : nb) {
        if (cand != prev && !visited[cand]) {
          next = cand;
          break;
        }
      }
      if (next < 0) {
        for (auto cand : nb) closed = closed || (cand == start && cur != start && poly.size() > 2);
        break;
      }
      prev = cur;
      cur = next;
    }
    curves.emplace_back(std::move(poly), closed);
  };
  for (const auto& [id, nb] : iso.links) {
    if (nb.size() == 1 && !visited[id]) walk(id);
  }
  for (const auto& [id, nb] : iso.links) {
    if (!visited[id]) walk(id);
  }
  return curves;
}

double bilinear(const Grid<double>& grid, Vec2 p, double mpp) {
  const int h = grid.height();
  const double fx = p.x / mpp - 0.5;
  const double fy = (h - p.y / mpp) - 0.5;
  const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, grid.width() - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, h - 1);
  const int x1 = std::min(x0 + 1, grid.width() - 1), y1 = std::min(y0 + 1, h - 1);
  const double tx = std::clamp(fx - x0, 0.0, 1.0), ty = std::clamp(fy - y0, 0.0, 1.0);
  const double a = grid.at(x0, y0) * (1 - tx) + grid.at(x1, y0) * tx;
  const double b = grid.at(x0, y1) * (1 - tx) + grid.at(x1, y1) * tx;
  return a * (1 - ty) + b * ty;
}

}  // namespace

std::vector<RoadsideCurve> trace_roadside_curves(const layout::LayoutMap& layout,
                                                 const SamplingConfig& cfg) {
  cfg.validate();
  const double mpp = layout.meters_per_pixel;
  const Grid<double> dt = distance_transform(layout.mask(SemanticClass::Road), mpp);
  std::vector<RoadsideCurve> curves;
  if (dt.empty() || !std::isfinite(dt[0])) return curves;

  const double s = cfg.roadside_spacing_s;
  for (auto& [poly, closed] : chain_segments(marching_squares(dt, cfg.roadside_offset_d, mpp))) {
    RoadsideCurve curve;
    curve.polyline = std::move(poly);
    curve.closed = closed;
    std::vector<double> cum(curve.polyline.size(), 0.0);
    for (std::size_t i = 1; i < curve.polyline.size(); ++i) {
      cum[i] = cum[i - 1] + norm(curve.polyline[i] - curve.polyline[i - 1]);
    }
    double length = cum.back();
    if (closed) length += norm(curve.polyline.front() - curve.polyline.back());
    curve.length = length;

    std::size_t n;
    double start;
    if (closed) {
      n = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(length / s)));
      start = 0.0;
    } else {
      n = static_cast<std::size_t>(std::floor(length / s)) + 1;
      start = 0.5 * (length - static_cast<double>(n - 1) * s);
    }
    std::size_t seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double arc = start + static_cast<double>(k) * s;
      Vec2 p;
      if (arc >= cum.back()) {
        // Closing segment of a closed curve.
        const Vec2 a = curve.polyline.back(), b = curve.polyline.front();
        const double len = norm(b - a);
        p = len > 0.0 ? a + (b - a) * ((arc - cum.back()) / len) : a;
      } else {
        while (seg + 1 < cum.size() && cum[seg + 1] < arc) ++seg;
        const double len = cum[seg + 1] - cum[seg];
        const double t = len > 0.0 ? (arc - cum[seg]) / len : 0.0;
        p = curve.polyline[seg] + (curve.polyline[seg + 1] - curve.polyline[seg]) * t;
      }
      RoadsideCurve::Sample sample;
      sample.position = p;
      sample.arc = arc;
      sample.index = k;
      sample.kind = k % 2 == 0 ? PlacementKind::Tree : PlacementKind::Streetlight;
      const Pixel px = pixel_at(p, layout.height(), mpp);
      if (layout.cells.contains(px.x, px.y)) {
        const SemanticClass cls = layout.at(px.x, px.y);
        const bool blocked = cls == SemanticClass::Road || cls == SemanticClass::Building ||
                             cls == SemanticClass::Water;
        const bool in_band = std::abs(bilinear(dt, p, mpp) - cfg.roadside_offset_d) <= mpp;
        sample.kept = !blocked && in_band;
      }
      curve.samples.push_back(sample);
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

std::vector<PlacementPoint> sample_roadside_points(const layout::LayoutMap& layout,
                                                   const SamplingConfig& cfg) {
  std::vector<PlacementPoint> out;
  for (const RoadsideCurve& c : trace_roadside_curves(layout, cfg)) {
    for (const auto& s : c.samples) {
      if (s.kept) out.push_back({s.position, s.kind, PlacementSource::Roadside});
    }
  }
  return out;
}

}  // namespace majutsu::placement
