// Acceptance suite: one line per criterion, exit status 1 if any fails.
// Each check uses the tolerance stated for it; nothing is relaxed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "majutsu/edit.hpp"
#include "majutsu/eval.hpp"
#include "majutsu/geometry.hpp"
#include "majutsu/layout.hpp"
#include "majutsu/placement.hpp"
#include "majutsu/providers.hpp"
#include "majutsu/scene.hpp"
#include "oracles.hpp"

#ifndef MAJUTSU_CLI_PATH
#error "MAJUTSU_CLI_PATH must name the majutsu executable"
#endif

using namespace majutsu;
namespace fs = std::filesystem;

namespace {

/// Collects failures for one criterion; the first few are echoed.
struct Check {
  std::vector<std::string> failures;
  std::size_t checks = 0;
  void operator()(bool ok, const std::string& what) {
    ++checks;
    if (!ok) failures.push_back(what);
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// ---- layout -------------------------------------------------------------------

std::size_t perimeter_pixels(const Bitmask& m) {
  std::size_t n = 0;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y)) continue;
      bool edge = false;
      for (auto [dx, dy] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}})
        edge = edge || !m.contains(x + dx, y + dy) || !m.at(x + dx, y + dy);
      n += edge;
    }
  return n;
}

void layout_oracle(Check& check) {
  const auto t0 = Clock::now();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const int w = 16 + static_cast<int>(seed * 7 % 49), h = 16 + static_cast<int>(seed * 13 % 49);
    const Bitmask mask = oracle::random_mask(seed + 500, w, h);
    layout::LayoutMap map(w, h);
    layout::HeightMap hmap(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (mask.at(x, y)) {
          map.set(x, y, layout::SemanticClass::Building);
          hmap.set(x, y, 5.0 + static_cast<double>((x + y) % 17));
        }
    int expected = 0;
    const auto ref = oracle::union_find_labels(mask, &expected);
    layout::ExtractOptions opts;
    opts.min_pixels = 1;
    const auto inst = layout::extract_building_instances(map, hmap, opts);
    const std::string tag = "mask " + std::to_string(seed);
    check(static_cast<int>(inst.size()) == expected, tag + ": component count");
    if (static_cast<int>(inst.size()) != expected) continue;
    std::vector<int> got(mask.size(), -1);
    for (std::size_t k = 0; k < inst.size(); ++k)
      for (const Pixel& p : inst[k].pixels) got[static_cast<std::size_t>(p.y * w + p.x)] = static_cast<int>(k) + 1;
    check(got == ref, tag + ": pixel labels differ from flood fill");
    const double mpp = map.meters_per_pixel;
    for (const auto& b : inst) {
      Bitmask comp(w, h, 0);
      for (const Pixel& p : b.pixels) comp.at(p.x, p.y) = 1;
      const double pixel_area = static_cast<double>(b.pixel_count) * mpp * mpp;
      check(std::abs(b.footprint.area() - pixel_area) <= static_cast<double>(perimeter_pixels(comp)) * mpp * mpp,
            tag + " " + b.id + ": footprint area outside the perimeter bound");
    }
  }
  const double dt = seconds_since(t0);
  check(dt < 5.0, "runtime " + fmt(dt) + " s >= 5 s");
}

// ---- geometry -----------------------------------------------------------------

double cross(Vec2 o, Vec2 a, Vec2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

/// O(n^2) check that no two non-adjacent edges touch.
bool is_simple(const std::vector<Vec2>& ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      const Vec2 a = ring[i], b = ring[(i + 1) % n], c = ring[j], d = ring[(j + 1) % n];
      const double d1 = cross(a, b, c), d2 = cross(a, b, d), d3 = cross(c, d, a), d4 = cross(c, d, b);
      if (((d1 > 0) != (d2 > 0) || d1 == 0 || d2 == 0) && ((d3 > 0) != (d4 > 0) || d3 == 0 || d4 == 0)) return false;
    }
  return true;
}

/// Star-shaped ring around a center: sorted angles with random radii and
/// every angular gap below pi. CCW.
std::vector<Vec2> random_simple_ring(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 3 + static_cast<int>(rng() % 22);
  std::vector<double> ang(static_cast<std::size_t>(n));
  for (auto& a : ang) a = u(rng) * 2.0 * std::numbers::pi;
  std::sort(ang.begin(), ang.end());
  ang.erase(std::unique(ang.begin(), ang.end()), ang.end());
  for (std::size_t i = 0; i < ang.size(); ++i) {
    const double next = i + 1 < ang.size() ? ang[i + 1] : ang[0] + 2.0 * std::numbers::pi;
    if (next - ang[i] >= 0.95 * std::numbers::pi) return {};
  }
  const Vec2 c{u(rng) * 400.0 - 200.0, u(rng) * 400.0 - 200.0};
  const double scale = 2.0 + u(rng) * 60.0;
  std::vector<Vec2> ring;
  for (double a : ang) {
    const double r = scale * (0.3 + 0.7 * u(rng));
    ring.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  return ring;
}

void geometry_conservation(Check& check) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int made = 0;
  while (made < 100) {
    const auto ring = random_simple_ring(rng);
    if (ring.size() < 3 || !is_simple(ring)) continue;
    const double area = oracle::ring_area(ring);
    if (area < 1e-6) continue;
    ++made;
    const std::string tag = "footprint " + std::to_string(made);
    geometry::Polygon poly{ring, {}};
    const double height = 3.0 + u(rng) * 150.0;
    const auto mesh = geometry::extrude_footprint(poly, height);
    const double vol = mesh.signed_volume();
    check(std::abs(vol - area * height) <= 1e-6 * area * height,
          tag + ": volume " + fmt(vol) + " vs " + fmt(area * height));

    const auto obb = geometry::compute_obb(ring);
    const double best = oracle::min_hull_edge_box_area(ring);
    check(obb.area() <= best + 1e-9, tag + ": OBB area " + fmt(obb.area()) + " > " + fmt(best));

    const geometry::Aabb asset{{-u(rng) * 5 - 0.1, -u(rng) * 5 - 0.1, 0.0},
                               {u(rng) * 5 + 0.1, u(rng) * 5 + 0.1, u(rng) * 20 + 0.5}};
    const auto fit = geometry::fit_placement(asset, obb, height);
    const double tol = 1e-9 * std::max(1.0, std::max(obb.half_w, obb.half_l));
    bool inside = true;
    for (double x : {asset.min.x, asset.max.x})
      for (double y : {asset.min.y, asset.max.y})
        for (double z : {asset.min.z, asset.max.z}) {
          const Vec3 p = fit.apply({x, y, z});
          inside = inside && obb.contains({p.x, p.y}, tol) && p.z >= -1e-9 && p.z <= height * (1 + 1e-9);
        }
    check(inside, tag + ": fitted asset leaves its OBB or height");
  }
}

// ---- placement ----------------------------------------------------------------

double road_distance(const layout::LayoutMap& map, Vec2 p) {
  double best = std::numeric_limits<double>::infinity();
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x)
      if (map.at(x, y) == layout::SemanticClass::Road)
        best = std::min(best, norm(pixel_center(x, y, map.height(), map.meters_per_pixel) - p));
  return best;
}

layout::LayoutMap road_shape(int which) {
  using layout::SemanticClass;
  if (which == 0) {  // straight strip, 100 m long
    layout::LayoutMap m(50, 40, SemanticClass::Ground, 2.0);
    for (int y = 18; y < 22; ++y)
      for (int x = 0; x < 50; ++x) m.set(x, y, SemanticClass::Road);
    return m;
  }
  if (which == 1) {  // ring road
    layout::LayoutMap m(80, 80, SemanticClass::Ground, 1.0);
    for (int y = 0; y < 80; ++y)
      for (int x = 0; x < 80; ++x) {
        const double r = norm(pixel_center(x, y, 80, 1.0) - Vec2{40, 40});
        if (r >= 20.0 && r <= 24.0) m.set(x, y, SemanticClass::Road);
      }
    return m;
  }
  // diagonal band |x - y| <= 3 px
  layout::LayoutMap m(64, 64, SemanticClass::Ground, 1.0);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      if (std::abs(x - y) <= 3) m.set(x, y, SemanticClass::Road);
  return m;
}

void placement_properties(Check& check) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Bitmask m = oracle::random_mask(seed * 104729 + 11, 64, 64);
    placement::SamplingConfig cfg;
    cfg.radius_r = 3.0 + static_cast<double>(seed % 6);
    cfg.seed = seed;
    const auto pts = placement::poisson_disk_sample(m, 1.5, cfg);
    std::size_t violations = 0, off_mask = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Pixel px = pixel_at(pts[i].position, 64, 1.5);
      off_mask += !m.contains(px.x, px.y) || !m.at(px.x, px.y);
      for (std::size_t j = i + 1; j < pts.size(); ++j)
        violations += norm(pts[i].position - pts[j].position) < cfg.radius_r;
    }
    const std::string tag = "poisson run " + std::to_string(seed);
    check(violations == 0, tag + ": " + std::to_string(violations) + " pairs closer than r");
    check(off_mask == 0, tag + ": points off the mask");
    check(count_set(m) == 0 || !pts.empty(), tag + ": no points on a non-empty mask");
    check(placement::poisson_disk_sample(m, 1.5, cfg) == pts, tag + ": not deterministic");
  }

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Bitmask m = oracle::random_mask(seed * 31 + 900, 64, 64);
    const double mpp = 0.5 + static_cast<double>(seed % 4);
    const auto dt = placement::distance_transform(m, mpp);
    const auto brute = oracle::brute_distance(m, mpp);
    std::size_t diff = 0;
    for (std::size_t i = 0; i < dt.size(); ++i) {
      const bool both_far = dt[i] == placement::kFarDistance && std::isinf(brute[i]);
      diff += !(both_far || dt[i] == brute[i]);
    }
    check(diff == 0, "distance transform grid " + std::to_string(seed) + ": " + std::to_string(diff) + " cells differ");
  }

  const char* names[] = {"straight strip", "ring road", "diagonal band"};
  for (int shape = 0; shape < 3; ++shape) {
    const auto map = road_shape(shape);
    placement::SamplingConfig cfg;
    if (shape > 0) cfg.roadside_spacing_s = 10.0;
    const auto curves = placement::trace_roadside_curves(map, cfg);
    const std::string tag = names[shape];
    check(curves.size() == 2, tag + ": expected two offset curves, got " + std::to_string(curves.size()));
    std::size_t samples = 0;
    for (const auto& c : curves) {
      for (std::size_t i = 0; i < c.samples.size(); ++i) {
        const auto& s = c.samples[i];
        ++samples;
        const double band = std::abs(road_distance(map, s.position) - cfg.roadside_offset_d);
        check(band <= map.meters_per_pixel, tag + ": sample off the offset band by " + fmt(band));
        check(s.kind == (i % 2 == 0 ? placement::PlacementKind::Tree : placement::PlacementKind::Streetlight),
              tag + ": kinds do not alternate");
        if (i > 0) {
          const double gap = norm(s.position - c.samples[i - 1].position);
          check(gap >= 0.9 * cfg.roadside_spacing_s && gap <= 1.1 * cfg.roadside_spacing_s,
                tag + ": spacing " + fmt(gap) + " outside +-10%");
        }
      }
    }
    check(samples >= 4, tag + ": too few samples");
    for (const auto& p : placement::sample_roadside_points(map, cfg)) {
      const double band = std::abs(road_distance(map, p.position) - cfg.roadside_offset_d);
      check(band <= map.meters_per_pixel, tag + ": emitted point off the band");
      const Pixel px = pixel_at(p.position, map.height(), map.meters_per_pixel);
      check(px.x >= 0 && px.y >= 0 && px.x < map.width() && px.y < map.height() && map.at(px.x, px.y) == layout::SemanticClass::Ground,
            tag + ": point on a road, building or water pixel");
    }
  }
}

// ---- metrics ------------------------------------------------------------------

eval::FeatureSet gaussian_set(std::mt19937_64& rng, std::size_t n, std::size_t d, double shift = 0.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  eval::FeatureSet f(n, d);
  for (auto& v : f.values) v = g(rng) + shift;
  return f;
}

void metric_oracles(Check& check) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(123);
  for (int k = 0; k < 10; ++k) {
    const auto a = gaussian_set(rng, 50 + 10 * static_cast<std::size_t>(k), 2 + static_cast<std::size_t>(k));
    const double fid = eval::compute_fid(a, a);
    check(std::abs(fid) <= 1e-8, "FID of identical sets " + fmt(fid));
  }
  // N(0,1) vs N(1,1) with exact sample moments in one dimension.
  const double s = 1.0 / std::sqrt(2.0);
  const eval::FeatureSet x(2, 1, {-s, s}), y(2, 1, {1.0 - s, 1.0 + s});
  const double one = eval::compute_fid(x, y);
  check(std::abs(one - 1.0) <= 1e-6, "1-D closed form FID " + fmt(one));

  for (std::size_t c : {2u, 5u, 10u, 1000u}) {
    eval::FeatureSet uniform(8, c), onehot(c, c);
    for (auto& v : uniform.values) v = 1.0 / static_cast<double>(c);
    for (std::size_t i = 0; i < c; ++i) onehot.at(i, i) = 1.0;
    const double iu = eval::compute_is(uniform), io = eval::compute_is(onehot);
    check(std::abs(iu - 1.0) <= 1e-12, "uniform IS " + fmt(iu));
    check(std::abs(io - static_cast<double>(c)) <= 1e-12 * static_cast<double>(c), "one-hot IS " + fmt(io));
  }
  std::gamma_distribution<double> g(0.5, 1.0);
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 5 + static_cast<std::size_t>(k), c = 2 + static_cast<std::size_t>(k % 15);
    eval::FeatureSet p(n, c);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < c; ++j) sum += (p.at(i, j) = g(rng) + 1e-12);
      for (std::size_t j = 0; j < c; ++j) p.at(i, j) /= sum;
    }
    const double is = eval::compute_is(p);
    check(is >= 1.0 - 1e-12 && is <= static_cast<double>(c) + 1e-12, "IS " + fmt(is) + " outside [1, C]");
  }

  std::vector<double> est;
  for (int r = 0; r < 100; ++r) est.push_back(eval::compute_kid(gaussian_set(rng, 40, 8), gaussian_set(rng, 40, 8)));
  const double mean = std::accumulate(est.begin(), est.end(), 0.0) / 100.0;
  double var = 0.0;
  for (double e : est) var += (e - mean) * (e - mean);
  const double se = std::sqrt(var / 99.0 / 100.0);
  check(std::abs(mean) < 3.0 * se, "KID mean " + fmt(mean) + " vs 3*stderr " + fmt(3.0 * se));

  const double dt = seconds_since(t0);
  check(dt < 30.0, "runtime " + fmt(dt) + " s >= 30 s");
}

// ---- trueskill ----------------------------------------------------------------

std::vector<eval::ComparisonRecord> planted_records(const std::vector<std::string>& methods, int per_pair,
                                                    std::uint64_t seed) {
  std::vector<eval::ComparisonRecord> recs;
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t j = i + 1; j < methods.size(); ++j)
      for (int k = 0; k < per_pair; ++k) {
        eval::ComparisonRecord r;
        r.dimension = eval::Dimension::SVC;
        const eval::ImageRef better{methods[i] + "/" + std::to_string(k), methods[i]};
        const eval::ImageRef worse{methods[j] + "/" + std::to_string(k), methods[j]};
        const bool flip = k % 2 == 1;
        r.a = flip ? worse : better;
        r.b = flip ? better : worse;
        r.winner = flip ? eval::Winner::B : eval::Winner::A;
        recs.push_back(r);
      }
  std::mt19937_64 rng(seed);
  std::shuffle(recs.begin(), recs.end(), rng);
  for (std::size_t k = 0; k < recs.size(); ++k) recs[k].timestamp = static_cast<std::int64_t>(k);
  return recs;
}

void trueskill(Check& check) {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> mu(-10.0, 60.0), sg(0.3, 15.0);
  const eval::TrueSkillParams params;
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const eval::Rating a{mu(rng), sg(rng)}, b{mu(rng), sg(rng)};
    const auto [w, l] = eval::trueskill_update_pair(a, b, params);
    const auto [rw, rl] = oracle::trueskill_quadrature({a.mu, a.sigma}, {b.mu, b.sigma}, params.beta, params.tau);
    worst = std::max({worst, std::abs(w.mu - rw.mu), std::abs(l.mu - rl.mu), std::abs(w.sigma - rw.sigma),
                      std::abs(l.sigma - rl.sigma)});
  }
  check(worst <= 1e-6, "update differs from the quadrature reference by " + fmt(worst));

  int recovered = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int m = 3 + static_cast<int>(seed % 4);
    std::vector<std::string> truth;
    // Names deliberately not in alphabetical order of strength.
    for (int i = 0; i < m; ++i) truth.push_back(std::string(1, static_cast<char>('a' + (i * 5 + 3) % 26)) + "_m");
    const auto board = eval::rank_methods(planted_records(truth, 30, seed));
    const auto& rows = board.by_dimension.at(eval::Dimension::SVC);
    bool ok = rows.size() == truth.size();
    for (std::size_t i = 0; ok && i < rows.size(); ++i) ok = rows[i].method == truth[i];
    recovered += ok;
  }
  check(recovered >= 95, "planted order recovered in " + std::to_string(recovered) + "/100 runs");

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 r(seed + 4242);
    const int methods = 2 + static_cast<int>(r() % 6);
    std::map<std::string, std::vector<std::string>> images;
    for (int mth = 0; mth < methods; ++mth) {
      const std::string name = "method" + std::to_string(mth);
      const int count = 1 + static_cast<int>(r() % 20);
      for (int i = 0; i < count; ++i) images[name].push_back(name + "/" + std::to_string(i));
    }
    const auto dim = eval::kDimensions[seed % eval::kDimensions.size()];
    const auto sched = eval::schedule_comparisons(images, dim, seed);
    std::map<std::string, int> uses;
    for (const auto& p : sched) {
      ++uses[p.a.id];
      ++uses[p.b.id];
      check(p.a.method != p.b.method, "schedule pairs a method with itself");
    }
    for (const auto& [_, ids] : images)
      for (const auto& id : ids)
        check(uses[id] >= 10, "config " + std::to_string(seed) + ": " + id + " in " + std::to_string(uses[id]) +
                                  " comparisons");
  }
}

// ---- edit algebra -------------------------------------------------------------

double angle_gap(double a, double b) {
  const double two_pi = 2.0 * std::numbers::pi;
  double d = std::fmod(std::abs(a - b), two_pi);
  return std::min(d, two_pi - d);
}

void edit_algebra(Check& check) {
  const auto base = fixture::make_document(8, 5, 4, 5);
  std::mt19937_64 rng(31337);
  std::size_t applied = 0, moves = 0;
  for (int seq = 0; seq < 1000; ++seq) {
    auto doc = base;
    const std::string tag = "sequence " + std::to_string(seq);
    const int steps = 1 + static_cast<int>(rng() % 12);
    for (int step = 0; step < steps; ++step) {
      const auto r = rng() % 10;
      if (r == 0 && !doc.undo_stack.empty()) {
        doc = edit::undo(doc);
        continue;
      }
      if (r == 1 && !doc.redo_stack.empty()) {
        doc = edit::redo(doc);
        continue;
      }
      const edit::EditCommand cmd = fixture::random_command(doc, rng);
      scene::SceneDocument next;
      try {
        next = edit::apply_command(doc, cmd);
      } catch (const Error&) {
        continue;
      }
      ++applied;
      check(scene::content_equal(edit::undo(next), doc), tag + ": undo is not an exact inverse");
      if (const auto* mv = std::get_if<edit::MoveCmd>(&cmd)) {
        ++moves;
        const auto& before = doc.instances.at(mv->instance_id).placement;
        const auto& after = next.instances.at(mv->instance_id).placement;
        const Vec3 t = before.translation + mv->d_translation;
        check(after.translation == t, tag + ": move translation");
        check(angle_gap(after.yaw, before.yaw + mv->d_yaw) <= 1e-12 && after.yaw >= 0.0 &&
                  after.yaw < 2.0 * std::numbers::pi,
              tag + ": move yaw");
        check(after.xy_scale == before.xy_scale * mv->d_scale && after.z_scale == before.z_scale * mv->d_scale,
              tag + ": move scale");
        // Group action: two moves equal one combined move.
        edit::MoveCmd second{mv->instance_id, {1.25, -3.5, 0.5}, 0.75, 1.5};
        edit::MoveCmd combined{mv->instance_id, mv->d_translation + second.d_translation,
                               mv->d_yaw + second.d_yaw, mv->d_scale * second.d_scale};
        const auto two_doc = edit::apply_command(next, second);
        const auto once_doc = edit::apply_command(doc, combined);
        const auto& two = two_doc.instances.at(mv->instance_id).placement;
        const auto& once = once_doc.instances.at(mv->instance_id).placement;
        check(norm(two.translation - once.translation) <= 1e-9 && angle_gap(two.yaw, once.yaw) <= 1e-9 &&
                  std::abs(two.xy_scale - once.xy_scale) <= 1e-12 * once.xy_scale,
              tag + ": move composition");
      }
      doc = std::move(next);
    }
    const auto replayed = edit::replay(base, doc.edit_log);
    check(scene::save_document(replayed) == scene::save_document(doc), tag + ": replay is not bit-exact");
  }
  check(applied > 3000, "only " + std::to_string(applied) + " commands applied");
  check(moves > 300, "only " + std::to_string(moves) + " moves applied");
}

// ---- end to end ---------------------------------------------------------------

std::string slurp(const fs::path& p) {
  const auto b = read_file(p.string());
  return std::string(b.begin(), b.end());
}

void end_to_end(Check& check) {
  const fs::path root = fs::temp_directory_path() / "majutsu_acceptance_e2e";
  fs::remove_all(root);
  const char* artifacts[] = {"design.json", "layout.png", "height.png", "scene.majutsu.json", "scene.glb",
                             "report.json"};
  std::vector<double> runtimes;
  for (const char* leaf : {"a", "b"}) {
    const fs::path out = root / leaf;
    const std::string cmd = std::string("\"") + MAJUTSU_CLI_PATH + "\" run --offline --seed 7 --out \"" +
                            out.string() + "\" \"small riverside town\" > \"" + (root / leaf).string() +
                            ".log\" 2>&1";
    fs::create_directories(root);
    const auto t0 = Clock::now();
    const int rc = std::system(cmd.c_str());
    runtimes.push_back(seconds_since(t0));
    check(rc == 0, std::string("run ") + leaf + " exited with " + std::to_string(rc));
    for (const char* name : artifacts)
      check(fs::is_regular_file(out / name) && fs::file_size(out / name) > 0,
            std::string("run ") + leaf + ": missing " + name);
  }
  for (double t : runtimes) check(t < 60.0, "runtime " + fmt(t) + " s >= 60 s");
  if (!fs::is_regular_file(root / "a" / "scene.majutsu.json") || !fs::is_regular_file(root / "b" / "scene.glb")) return;

  check(slurp(root / "a" / "scene.majutsu.json") == slurp(root / "b" / "scene.majutsu.json"),
        "scene document differs across reruns");
  for (const char* name : {"design.json", "layout.png", "height.png", "scene.glb"})
    check(slurp(root / "a" / name) == slurp(root / "b" / name), std::string(name) + " differs across reruns");

  const auto doc = scene::load_document(slurp(root / "a" / "scene.majutsu.json"), (root / "a").string());
  check(doc.meta.width_px == 512 && doc.meta.height_px == 512, "tile is not 512x512");
  try {
    const auto summary = scene::inspect_glb(read_file((root / "a" / "scene.glb").string()));
    const std::size_t layers = scene::kLayerKinds.size();
    check(summary.nodes.size() == layers + 1 + doc.instances.size(),
          "glb has " + std::to_string(summary.nodes.size()) + " nodes, expected " +
              std::to_string(layers + 1 + doc.instances.size()));
  } catch (const Error& e) {
    check(false, std::string("glb failed structural validation: ") + e.what());
  }
  fs::remove_all(root);
}

// ---- refine loop --------------------------------------------------------------

void refine_loop(Check& check) {
  layout::BuildingInstance inst;
  inst.id = "bldg_0001";
  inst.footprint.outer = {{0, 0}, {12, 0}, {12, 18}, {0, 18}};
  inst.obb = geometry::compute_obb(inst.footprint.outer);
  inst.target_height = 25.0;
  inst.pixel_count = 54;
  providers::ProviderConfig cfg;
  const auto req = providers::make_asset_request(inst, providers::offline_design("acceptance", 1), cfg);

  int gen_calls = 0, score_calls = 0;
  const providers::AssetGenerator gen = [&](const providers::AssetRequest& r, int it) {
    ++gen_calls;
    if (it != gen_calls) check(false, "iteration index skipped");
    return r.coarse_mesh;
  };
  auto constant = [&](double v) {
    return providers::ShapeScorer([&score_calls, v](const geometry::Mesh&, const providers::AssetRequest&) {
      ++score_calls;
      return v;
    });
  };

  check(std::abs(cfg.iou_threshold - 0.85) < 1e-12 && cfg.max_refine_iters == 3, "defaults are not theta 0.85, 3 iterations");

  // IoU 1.0: accepted on the first iteration.
  gen_calls = score_calls = 0;
  auto r = providers::constrained_refine_loop(req, cfg, gen, constant(1.0));
  check(gen_calls == 1 && score_calls == 1 && r.trace.accepted && r.trace.steps.size() == 1 &&
            r.trace.steps[0].iteration == 1,
        "accept-at-1");

  // IoU 0 with theta 0.85: exhausted after exactly three iterations.
  gen_calls = score_calls = 0;
  providers::RefineTrace trace;
  bool exhausted = false;
  try {
    providers::constrained_refine_loop(req, cfg, gen, constant(0.0), &trace);
  } catch (const Error& e) {
    exhausted = e.code() == ErrorCode::RefineExhausted;
  }
  check(exhausted && gen_calls == 3 && score_calls == 3 && trace.steps.size() == 3 && !trace.accepted,
        "exhaust-at-3");

  // Just below theta also exhausts; exactly theta accepts.
  gen_calls = 0;
  try {
    providers::constrained_refine_loop(req, cfg, gen, constant(std::nextafter(cfg.iou_threshold, 0.0)));
    check(false, "score below theta accepted");
  } catch (const Error& e) {
    check(e.code() == ErrorCode::RefineExhausted && gen_calls == 3, "score below theta");
  }
  gen_calls = 0;
  r = providers::constrained_refine_loop(req, cfg, gen, constant(cfg.iou_threshold));
  check(gen_calls == 1 && r.trace.accepted, "score equal to theta");

  // theta = 0 accepts whatever comes back.
  cfg.iou_threshold = 0.0;
  gen_calls = score_calls = 0;
  r = providers::constrained_refine_loop(req, cfg, gen, constant(0.0));
  check(gen_calls == 1 && r.trace.accepted && r.trace.steps.size() == 1, "theta 0 accept-always");
}

struct Criterion {
  const char* name;
  std::function<void(Check&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"layout oracle suite", layout_oracle},
      {"geometry conservation", geometry_conservation},
      {"placement properties", placement_properties},
      {"metric oracles", metric_oracles},
      {"trueskill", trueskill},
      {"edit-engine algebra", edit_algebra},
      {"end-to-end offline run", end_to_end},
      {"refine loop", refine_loop},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Check check;
    const auto t0 = Clock::now();
    try {
      c.run(check);
    } catch (const std::exception& e) {
      check(false, std::string("threw: ") + e.what());
    }
    const double dt = seconds_since(t0);
    const bool ok = check.failures.empty();
    failed += !ok;
    std::printf("%s  %-24s %6zu checks  %7.2f s\n", ok ? "PASS" : "FAIL", c.name, check.checks, dt);
    for (std::size_t i = 0; i < check.failures.size() && i < 5; ++i)
      std::printf("      - %s\n", check.failures[i].c_str());
    if (check.failures.size() > 5) std::printf("      ... %zu more\n", check.failures.size() - 5);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
