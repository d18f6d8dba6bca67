#include "majutsu/layout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>

namespace majutsu::layout {

namespace {

struct PaletteEntry {
  SemanticClass cls;
  std::string_view name;
  Rgb rgb;
};

constexpr std::array<PaletteEntry, kClassCount> kPalette = {{
    {SemanticClass::Ground, "ground", {200, 200, 200}},
    {SemanticClass::Road, "road", {80, 80, 80}},
    {SemanticClass::Water, "water", {60, 120, 220}},
    {SemanticClass::Vegetation, "vegetation", {60, 180, 75}},
    {SemanticClass::Building, "building", {230, 90, 60}},
}};

}  // namespace

Rgb palette_color(SemanticClass cls) { return kPalette[static_cast<int>(cls)].rgb; }

std::string_view class_name(SemanticClass cls) { return kPalette[static_cast<int>(cls)].name; }

SemanticClass class_from_name(std::string_view name) {
  for (const auto& e : kPalette) {
    if (e.name == name) return e.cls;
  }
  throw Error(ErrorCode::SchemaViolation, std::string(name), "unknown semantic class");
}

std::string palette_json() {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& e : kPalette) {
    classes.push_back({{"class", e.name},
                       {"index", static_cast<int>(e.cls)},
                       {"rgb", {e.rgb.r, e.rgb.g, e.rgb.b}}});
  }
  return nlohmann::json{{"version", "majutsu-palette/1"}, {"classes", classes}}.dump(2) + "\n";
}

std::array<std::size_t, kClassCount> LayoutMap::histogram() const {
  std::array<std::size_t, kClassCount> h{};
  for (auto c : cells.cells()) ++h[static_cast<int>(c)];
  return h;
}

Bitmask LayoutMap::mask(SemanticClass cls) const {
  Bitmask m(width(), height(), 0);
  for (std::size_t i = 0; i < cells.size(); ++i) m[i] = cells[i] == cls ? 1 : 0;
  return m;
}

ValidationReport validate_consistency(const LayoutMap& layout, const HeightMap& hmap,
                                      const ConsistencyOptions& opts) {
  if (layout.width() != hmap.width() || layout.height() != hmap.height()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(layout.width()) + "x" + std::to_string(layout.height()) + " vs " +
                    std::to_string(hmap.width()) + "x" + std::to_string(hmap.height()));
  }
  ValidationReport report;
  bool repairable = true;
  for (int y = 0; y < layout.height(); ++y) {
    for (int x = 0; x < layout.width(); ++x) {
      const double h = hmap.at(x, y);
      if (!std::isfinite(h) || h < 0.0) repairable = false;
      if (layout.at(x, y) == SemanticClass::Building) {
        if (!(h >= opts.min_height)) report.low_building.push_back({x, y});
      } else if (h > 0.0) {
        report.stray_height.push_back({x, y});
      }
    }
  }
  report.valid_after_repair = repairable;
  return report;
}

HeightMap repair_consistency(const LayoutMap& layout, const HeightMap& hmap,
                             const ConsistencyOptions& opts, ValidationReport* report) {
  ValidationReport found = validate_consistency(layout, hmap, opts);
  HeightMap out = hmap;
  for (auto p : found.low_building) out.set(p.x, p.y, opts.min_height);
  for (auto p : found.stray_height) out.set(p.x, p.y, 0.0);
  if (!found.valid_after_repair) {
    // Non-finite or negative heights on building pixels were clamped above;
    // zero them elsewhere.
    for (auto& h : out.heights.cells()) {
      if (!std::isfinite(h) || h < 0.0) h = 0.0;
    }
  }
  if (!found.low_building.empty()) {
    found.warnings.push_back(std::to_string(found.low_building.size()) +
                             " building pixels clamped to " + format_double(opts.min_height) +
                             " m");
  }
  if (!found.stray_height.empty()) {
    found.warnings.push_back(std::to_string(found.stray_height.size()) +
                             " non-building pixels with positive height zeroed");
  }
  found.valid_after_repair = validate_consistency(layout, out, opts).clean();
  if (report) *report = std::move(found);
  return out;
}

ComponentLabels label_components(const Bitmask& mask) {
  ComponentLabels out{Grid<int>(mask.width(), mask.height(), 0), 0};
  std::vector<Pixel> stack;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y) || out.labels.at(x, y) != 0) continue;
      const int label = ++out.count;
      out.labels.at(x, y) = label;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x + dx, ny = p.y + dy;
            if (!mask.contains(nx, ny) || !mask.at(nx, ny) || out.labels.at(nx, ny) != 0) continue;
            out.labels.at(nx, ny) = label;
            stack.push_back({nx, ny});
          }
        }
      }
    }
  }
  return out;
}

double signed_ring_area(const std::vector<Vec2>& ring) { return geometry::signed_area(ring); }

namespace {

// Lattice vertex in map orientation: i east, j north; pixel (c, r) covers
// [c, c+1] x [H-r-1, H-r].
struct LatticePoint {
  int i = 0;
  int j = 0;
  friend bool operator==(const LatticePoint&, const LatticePoint&) = default;
};

struct BoundaryEdge {
  LatticePoint from;
  LatticePoint to;
};

std::vector<std::vector<LatticePoint>> trace_lattice_rings(const Bitmask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  auto set = [&](int x, int y) { return mask.contains(x, y) && mask.at(x, y) != 0; };
  auto key = [&](LatticePoint p) {
    return static_cast<std::size_t>(p.j) * static_cast<std::size_t>(w + 1) +
           static_cast<std::size_t>(p.i);
  };

  std::vector<BoundaryEdge> edges;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!set(c, r)) continue;
      const int b = h - r - 1;
      // Region on the left of each directed edge (counter-clockwise per pixel).
      if (!set(c, r + 1)) edges.push_back({{c, b}, {c + 1, b}});
      if (!set(c + 1, r)) edges.push_back({{c + 1, b}, {c + 1, b + 1}});
      if (!set(c, r - 1)) edges.push_back({{c + 1, b + 1}, {c, b + 1}});
      if (!set(c - 1, r)) edges.push_back({{c, b + 1}, {c, b}});
    }
  }

  // Up to two outgoing edges per lattice vertex.
  std::vector<std::array<int, 2>> outgoing(static_cast<std::size_t>(w + 1) * (h + 1),
                                           std::array<int, 2>{-1, -1});
  for (int e = 0; e < static_cast<int>(edges.size()); ++e) {
    auto& slot = outgoing[key(edges[static_cast<std::size_t>(e)].from)];
    (slot[0] < 0 ? slot[0] : slot[1]) = e;
  }

  std::vector<std::uint8_t> used(edges.size(), 0);
  std::vector<std::vector<LatticePoint>> rings;
  for (std::size_t start = 0; start < edges.size(); ++start) {
    if (used[start]) continue;
    std::vector<LatticePoint> ring;
    int e = static_cast<int>(start);
    while (!used[static_cast<std::size_t>(e)]) {
      used[static_cast<std::size_t>(e)] = 1;
      const BoundaryEdge& cur = edges[static_cast<std::size_t>(e)];
      ring.push_back(cur.from);
      const auto& slot = outgoing[key(cur.to)];
      int next = slot[0];
      if (slot[1] >= 0) {
        // Pinch vertex: turn right so diagonal neighbours stay on one ring
        // (8-connected foreground, 4-connected background).
        const int dx = cur.to.i - cur.from.i, dy = cur.to.j - cur.from.j;
        const LatticePoint right{cur.to.i + dy, cur.to.j - dx};
        const auto& e0 = edges[static_cast<std::size_t>(slot[0])];
        next = e0.to == right ? slot[0] : slot[1];
        if (used[static_cast<std::size_t>(next)]) {
          next = next == slot[0] ? slot[1] : slot[0];
        }
      }
      if (next < 0) break;
      e = next;
    }
    rings.push_back(std::move(ring));
  }
  return rings;
}

std::vector<Vec2> drop_collinear(const std::vector<Vec2>& ring) {
  const std::size_t n = ring.size();
  if (n < 4) return ring;
  std::vector<Vec2> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec2 prev = ring[(k + n - 1) % n];
    const Vec2 cur = ring[k];
    const Vec2 next = ring[(k + 1) % n];
    if (std::abs(cross(cur - prev, next - cur)) > 1e-12) out.push_back(cur);
  }
  return out.size() >= 3 ? out : ring;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 <= 0.0) return norm(p - a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return norm(p - (a + ab * t));
}

void dp_recurse(const std::vector<Vec2>& pts, std::size_t lo, std::size_t hi, double tol,
                std::vector<std::uint8_t>& keep) {
  if (hi <= lo + 1) return;
  double best = -1.0;
  std::size_t best_k = lo;
  for (std::size_t k = lo + 1; k < hi; ++k) {
    const double d = point_segment_distance(pts[k], pts[lo], pts[hi]);
    if (d > best) {
      best = d;
      best_k = k;
    }
  }
  if (best > tol) {
    keep[best_k] = 1;
    dp_recurse(pts, lo, best_k, tol, keep);
    dp_recurse(pts, best_k, hi, tol, keep);
  }
}

bool segments_cross(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  auto orient = [](Vec2 p, Vec2 q, Vec2 r) {
    const double v = cross(q - p, r - p);
    return (v > 1e-12) - (v < -1e-12);
  };
  const int o1 = orient(a, b, c), o2 = orient(a, b, d);
  const int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
  auto on_segment = [](Vec2 p, Vec2 q, Vec2 r) {
    return std::min(p.x, q.x) - 1e-12 <= r.x && r.x <= std::max(p.x, q.x) + 1e-12 &&
           std::min(p.y, q.y) - 1e-12 <= r.y && r.y <= std::max(p.y, q.y) + 1e-12;
  };
  // Collinear overlap (touching at a shared endpoint is allowed by callers).
  if (o1 == 0 && on_segment(a, b, c) && !(c == a || c == b)) return true;
  if (o2 == 0 && on_segment(a, b, d) && !(d == a || d == b)) return true;
  if (o3 == 0 && on_segment(c, d, a) && !(a == c || a == d)) return true;
  if (o4 == 0 && on_segment(c, d, b) && !(b == c || b == d)) return true;
  return false;
}

bool ring_is_simple(const std::vector<Vec2>& ring) {
  const std::size_t n = ring.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = ring[i], b = ring[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      const Vec2 c = ring[j], d = ring[(j + 1) % n];
      if (segments_cross(a, b, c, d)) return false;
      if (a == c || a == d || b == c || b == d) return false;
    }
  }
  return true;
}

std::vector<Vec2> simplify_ring(const std::vector<Vec2>& raw, double tol, bool require_simple) {
  std::vector<Vec2> base = drop_collinear(raw);
  if (tol <= 0.0 || base.size() <= 4) return base;
  std::vector<Vec2> simplified = douglas_peucker_ring(base, tol);
  if (simplified.size() < 3) return base;
  const double a0 = signed_ring_area(base);
  const double a1 = signed_ring_area(simplified);
  if ((a0 > 0) != (a1 > 0) || std::abs(a1) <= 1e-12) return base;
  if (require_simple && !ring_is_simple(simplified)) return base;
  return simplified;
}

geometry::Polygon polygon_from_rings(const std::vector<std::vector<LatticePoint>>& rings,
                                     double mpp, double tol, bool require_simple,
                                     int offset_i, int offset_j) {
  geometry::Polygon poly;
  for (const auto& lr : rings) {
    std::vector<Vec2> ring;
    ring.reserve(lr.size());
    for (auto p : lr) ring.push_back({(p.i + offset_i) * mpp, (p.j + offset_j) * mpp});
    const double area = signed_ring_area(ring);
    std::vector<Vec2> simple = simplify_ring(ring, tol, require_simple);
    if (area > 0.0) {
      if (!poly.outer.empty()) {
        throw Error(ErrorCode::MultipleComponents, "", "mask has more than one outer boundary");
      }
      poly.outer = std::move(simple);
    } else if (area < 0.0) {
      poly.holes.push_back(std::move(simple));
    }
  }
  return poly;
}

// Bounding box of one labelled component, expanded to a sub-mask.
struct SubMask {
  Bitmask mask;
  int x0 = 0;
  int y0 = 0;
};

}  // namespace

std::vector<Vec2> douglas_peucker_ring(const std::vector<Vec2>& ring, double tol) {
  const std::size_t n = ring.size();
  if (n <= 3) return ring;
  // Anchor at the lexicographically smallest vertex (always a hull vertex)
  // and at the vertex farthest from it.
  std::size_t anchor = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (ring[k].x < ring[anchor].x ||
        (ring[k].x == ring[anchor].x && ring[k].y < ring[anchor].y)) {
      anchor = k;
    }
  }
  std::vector<Vec2> pts(n + 1);
  for (std::size_t k = 0; k <= n; ++k) pts[k] = ring[(anchor + k) % n];
  std::size_t far = 1;
  double far_d = -1.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double d = norm(pts[k] - pts[0]);
    if (d > far_d) {
      far_d = d;
      far = k;
    }
  }
  std::vector<std::uint8_t> keep(n + 1, 0);
  keep[0] = keep[far] = keep[n] = 1;
  dp_recurse(pts, 0, far, tol, keep);
  dp_recurse(pts, far, n, tol, keep);
  std::vector<Vec2> out;
  for (std::size_t k = 0; k < n; ++k) {
    if (keep[k]) out.push_back(pts[k]);
  }
  return out;
}

FootprintPolygon trace_footprint(const Bitmask& mask, double meters_per_pixel,
                                 double simplify_tol) {
  if (count_set(mask) == 0) throw Error(ErrorCode::EmptyMask, "");
  if (label_components(mask).count != 1) throw Error(ErrorCode::MultipleComponents, "");
  const double tol = simplify_tol < 0.0 ? 0.5 * meters_per_pixel : simplify_tol;
  return polygon_from_rings(trace_lattice_rings(mask), meters_per_pixel, tol, true, 0, 0);
}

namespace {

std::vector<SubMask> split_components(const ComponentLabels& labels) {
  const int w = labels.labels.width(), h = labels.labels.height();
  struct Box {
    int x0 = std::numeric_limits<int>::max(), y0 = std::numeric_limits<int>::max();
    int x1 = -1, y1 = -1;
  };
  std::vector<Box> boxes(static_cast<std::size_t>(labels.count));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = labels.labels.at(x, y);
      if (l == 0) continue;
      Box& b = boxes[static_cast<std::size_t>(l - 1)];
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  std::vector<SubMask> out;
  out.reserve(boxes.size());
  for (int l = 1; l <= labels.count; ++l) {
    const Box& b = boxes[static_cast<std::size_t>(l - 1)];
    SubMask sm{Bitmask(b.x1 - b.x0 + 1, b.y1 - b.y0 + 1, 0), b.x0, b.y0};
    for (int y = b.y0; y <= b.y1; ++y) {
      for (int x = b.x0; x <= b.x1; ++x) {
        if (labels.labels.at(x, y) == l) sm.mask.at(x - b.x0, y - b.y0) = 1;
      }
    }
    out.push_back(std::move(sm));
  }
  return out;
}

}  // namespace

std::vector<FootprintPolygon> trace_all_components(const Bitmask& mask, double meters_per_pixel,
                                                   double simplify_tol) {
  const double tol = simplify_tol < 0.0 ? 0.5 * meters_per_pixel : simplify_tol;
  std::vector<FootprintPolygon> out;
  for (const SubMask& sm : split_components(label_components(mask))) {
    // Lattice j of the sub-mask's bottom row in the full map.
    const int offset_j = mask.height() - (sm.y0 + sm.mask.height());
    out.push_back(polygon_from_rings(trace_lattice_rings(sm.mask), meters_per_pixel, tol, false,
                                     sm.x0, offset_j));
  }
  return out;
}

std::vector<BuildingInstance> extract_building_instances(const LayoutMap& layout,
                                                         const HeightMap& hmap,
                                                         const ExtractOptions& opts,
                                                         std::vector<std::string>* warnings) {
  if (layout.width() != hmap.width() || layout.height() != hmap.height()) {
    throw Error(ErrorCode::DimensionMismatch, "");
  }
  const double mpp = layout.meters_per_pixel;
  const double tol = opts.simplify_tol < 0.0 ? 0.5 * mpp : opts.simplify_tol;
  const ComponentLabels labels = label_components(layout.mask(SemanticClass::Building));
  const std::vector<SubMask> parts = split_components(labels);

  std::vector<BuildingInstance> out;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const SubMask& sm = parts[k];
    BuildingInstance inst;
    double sum = 0.0;
    for (int y = 0; y < sm.mask.height(); ++y) {
      for (int x = 0; x < sm.mask.width(); ++x) {
        if (!sm.mask.at(x, y)) continue;
        inst.pixels.push_back({sm.x0 + x, sm.y0 + y});
        sum += hmap.at(sm.x0 + x, sm.y0 + y);
      }
    }
    inst.pixel_count = inst.pixels.size();
    if (inst.pixel_count < opts.min_pixels) {
      if (warnings) {
        warnings->push_back("dropped building component at (" +
                            std::to_string(inst.pixels.front().x) + "," +
                            std::to_string(inst.pixels.front().y) + ") with " +
                            std::to_string(inst.pixel_count) + " pixels");
      }
      continue;
    }
    inst.target_height = sum / static_cast<double>(inst.pixel_count);
    const int offset_j = layout.height() - (sm.y0 + sm.mask.height());
    inst.footprint =
        polygon_from_rings(trace_lattice_rings(sm.mask), mpp, tol, true, sm.x0, offset_j);
    inst.obb = geometry::compute_obb(inst.footprint.outer);
    char id[32];
    std::snprintf(id, sizeof id, "bldg_%04zu", out.size() + 1);
    inst.id = id;
    out.push_back(std::move(inst));
  }
  return out;
}

geometry::SimilarityPlacement fit_placement(const geometry::Aabb& asset_bounds,
                                            const BuildingInstance& instance) {
  return geometry::fit_placement(asset_bounds, instance.obb, instance.target_height);
}

}  // namespace majutsu::layout
