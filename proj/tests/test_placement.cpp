#include <doctest.h>

#include <cmath>
#include <limits>

#include "majutsu/placement.hpp"
#include "oracles.hpp"

using namespace majutsu;
using namespace majutsu::placement;
using layout::LayoutMap;
using layout::SemanticClass;

namespace {

double min_pair_distance(const std::vector<PlacementPoint>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      best = std::min(best, norm(pts[i].position - pts[j].position));
  return best;
}

double continuous_road_distance(const LayoutMap& map, Vec2 p) {
  double best = std::numeric_limits<double>::infinity();
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x)
      if (map.at(x, y) == SemanticClass::Road)
        best = std::min(best, norm(pixel_center(x, y, map.height(), map.meters_per_pixel) - p));
  return best;
}

LayoutMap horizontal_strip(int w, int h, int row0, int rows, double mpp) {
  LayoutMap m(w, h, SemanticClass::Ground, mpp);
  for (int y = row0; y < row0 + rows; ++y)
    for (int x = 0; x < w; ++x) m.set(x, y, SemanticClass::Road);
  return m;
}

}  // namespace

TEST_CASE("sampling config validation") {
  SamplingConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.radius_r = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.roadside_spacing_s = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.roadside_offset_d = -0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.roadside_offset_d = 0.0;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("poisson: empty mask") {
  Bitmask m(32, 32, 0);
  CHECK(poisson_disk_sample(m, 2.0, {}).empty());
}

TEST_CASE("poisson: radius beyond diagonal yields at most one point") {
  Bitmask m(10, 10, 1);
  SamplingConfig cfg;
  cfg.radius_r = 100.0;  // diagonal is 20*sqrt(2) m
  CHECK(poisson_disk_sample(m, 2.0, cfg).size() <= 1);
}

TEST_CASE("poisson: 100 m square, r = 10, exhaustive spacing and determinism") {
  Bitmask m(50, 50, 1);
  SamplingConfig cfg;
  cfg.radius_r = 10.0;
  cfg.seed = 42;
  const auto a = poisson_disk_sample(m, 2.0, cfg);
  const auto b = poisson_disk_sample(m, 2.0, cfg);
  CHECK(a == b);
  REQUIRE(a.size() > 40);  // a maximal packing of 100 m^2 / r^2 needs dozens
  CHECK(min_pair_distance(a) >= 10.0);
  for (const auto& p : a) {
    CHECK(p.source == PlacementSource::VegetationFill);
    CHECK(p.position.x >= 0.0);
    CHECK(p.position.x < 100.0);
    CHECK(p.position.y >= 0.0);
    CHECK(p.position.y < 100.0);
  }
  cfg.seed = 43;
  CHECK(poisson_disk_sample(m, 2.0, cfg) != a);
}

TEST_CASE("poisson: random masks, points on mask and spaced") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Bitmask m = oracle::random_mask(seed * 7919 + 3, 64, 64);
    SamplingConfig cfg;
    cfg.radius_r = 4.0 + static_cast<double>(seed % 4);
    cfg.seed = seed;
    const auto pts = poisson_disk_sample(m, 1.5, cfg);
    if (count_set(m) > 0) CHECK(!pts.empty());
    for (const auto& p : pts) {
      const Pixel px = pixel_at(p.position, 64, 1.5);
      REQUIRE(m.contains(px.x, px.y));
      CHECK(m.at(px.x, px.y) == 1);
    }
    CHECK(min_pair_distance(pts) >= cfg.radius_r);
  }
}

TEST_CASE("distance transform: single pixel") {
  Bitmask m(7, 7, 0);
  m.at(3, 3) = 1;
  const auto dt = distance_transform(m, 2.0);
  CHECK(dt.at(3, 3) == 0.0);
  CHECK(dt.at(2, 3) == doctest::Approx(2.0));
  CHECK(dt.at(3, 4) == doctest::Approx(2.0));
  CHECK(dt.at(4, 4) == doctest::Approx(2.0 * std::sqrt(2.0)));
  CHECK(dt.at(0, 0) == doctest::Approx(2.0 * 3.0 * std::sqrt(2.0)));
}

TEST_CASE("distance transform: empty mask is all sentinel") {
  Bitmask m(5, 4, 0);
  const auto dt = distance_transform(m, 1.0);
  for (double v : dt.cells()) CHECK(v == kFarDistance);
}

TEST_CASE("distance transform: strip centerline to complement") {
  // 5-pixel strip; the complement transform measures center-to-center
  // distance, so the centerline sits 3 pixels from the nearest non-strip pixel.
  Bitmask strip(20, 15, 0);
  for (int y = 5; y < 10; ++y)
    for (int x = 0; x < 20; ++x) strip.at(x, y) = 1;
  Bitmask complement(20, 15, 0);
  for (std::size_t i = 0; i < strip.size(); ++i) complement[i] = strip[i] ? 0 : 1;
  const auto dt = distance_transform(complement, 1.0);
  const auto brute = oracle::brute_distance(complement, 1.0);
  for (int x = 0; x < 20; ++x) {
    CHECK(dt.at(x, 7) == doctest::Approx(3.0));
    CHECK(dt.at(x, 7) == brute[static_cast<std::size_t>(7 * 20 + x)]);
  }
}

TEST_CASE("distance transform equals brute force on random 64x64 masks") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Bitmask m = oracle::random_mask(seed + 100, 64, 64);
    if (seed == 0) {
      m = Bitmask(64, 64, 0);
      m.at(63, 0) = 1;
    }
    const auto dt = distance_transform(m, 2.0);
    const auto brute = oracle::brute_distance(m, 2.0);
    for (std::size_t i = 0; i < dt.size(); ++i) REQUIRE(dt[i] == brute[i]);
  }
}

TEST_CASE("roadside: straight 100 m strip") {
  // 50 px * 2 m = 100 m long, 4 px wide, rows 18..21.
  const LayoutMap map = horizontal_strip(50, 40, 18, 4, 2.0);
  SamplingConfig cfg;
  const auto curves = trace_roadside_curves(map, cfg);
  REQUIRE(curves.size() == 2);
  // Analytic offset lines: road edge pixel centers +- offset.
  const double top_center_y = (40 - 18 - 0.5) * 2.0;
  const double bottom_center_y = (40 - 21 - 0.5) * 2.0;
  int side_hits[2] = {0, 0};
  for (const auto& c : curves) {
    CHECK_FALSE(c.closed);
    CHECK(c.length == doctest::Approx(98.0));
    REQUIRE(c.samples.size() >= 4);
    CHECK(c.samples.size() <= 5);
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
      const auto& s = c.samples[i];
      CHECK(s.kind == (i % 2 == 0 ? PlacementKind::Tree : PlacementKind::Streetlight));
      CHECK(s.kept);
      const bool upper = s.position.y > top_center_y;
      const double expected = upper ? top_center_y + 3.0 : bottom_center_y - 3.0;
      CHECK(s.position.y == doctest::Approx(expected));
      side_hits[upper ? 0 : 1]++;
      if (i > 0) {
        const double gap = s.arc - c.samples[i - 1].arc;
        CHECK(gap >= 22.5);
        CHECK(gap <= 27.5);
        const double chord = norm(s.position - c.samples[i - 1].position);
        CHECK(chord == doctest::Approx(25.0));
      }
    }
  }
  CHECK(side_hits[0] == side_hits[1]);
  const auto pts = sample_roadside_points(map, cfg);
  CHECK(pts.size() == curves[0].samples.size() + curves[1].samples.size());
  for (const auto& p : pts) {
    CHECK(p.source == PlacementSource::Roadside);
    CHECK(std::abs(continuous_road_distance(map, p.position) - 3.0) <= 2.0);
  }
}

TEST_CASE("roadside: spacing longer than the curve gives one point") {
  const LayoutMap map = horizontal_strip(20, 20, 8, 3, 1.0);
  SamplingConfig cfg;
  cfg.roadside_spacing_s = 500.0;
  for (const auto& c : trace_roadside_curves(map, cfg)) CHECK(c.samples.size() <= 1);
}

TEST_CASE("roadside: water on one side suppresses that side") {
  LayoutMap map = horizontal_strip(50, 40, 18, 4, 2.0);
  for (int y = 22; y < 40; ++y)
    for (int x = 0; x < 50; ++x) map.set(x, y, SemanticClass::Water);
  const auto pts = sample_roadside_points(map, {});
  REQUIRE(!pts.empty());
  const double top_center_y = (40 - 18 - 0.5) * 2.0;
  for (const auto& p : pts) CHECK(p.position.y > top_center_y);
}

TEST_CASE("roadside: buildings drop only colliding samples") {
  LayoutMap map = horizontal_strip(50, 40, 18, 4, 2.0);
  for (int y = 10; y < 17; ++y)
    for (int x = 0; x < 25; ++x) map.set(x, y, SemanticClass::Building);
  for (const auto& p : sample_roadside_points(map, {})) {
    const Pixel px = pixel_at(p.position, 40, 2.0);
    CHECK(map.at(px.x, px.y) != SemanticClass::Building);
  }
}

TEST_CASE("roadside: ring road gives closed curves with band and spacing") {
  LayoutMap map(80, 80, SemanticClass::Ground, 1.0);
  const Vec2 c{40.0, 40.0};
  for (int y = 0; y < 80; ++y)
    for (int x = 0; x < 80; ++x) {
      const double r = norm(pixel_center(x, y, 80, 1.0) - c);
      if (r >= 20.0 && r <= 24.0) map.set(x, y, SemanticClass::Road);
    }
  SamplingConfig cfg;
  cfg.roadside_spacing_s = 10.0;
  const auto curves = trace_roadside_curves(map, cfg);
  REQUIRE(curves.size() == 2);
  for (const auto& curve : curves) {
    CHECK(curve.closed);
    for (std::size_t i = 1; i < curve.samples.size(); ++i) {
      const double chord = norm(curve.samples[i].position - curve.samples[i - 1].position);
      CHECK(chord >= 9.0);
      CHECK(chord <= 11.0);
    }
    for (const auto& s : curve.samples) {
      if (!s.kept) continue;
      CHECK(std::abs(continuous_road_distance(map, s.position) - 3.0) <= 1.0);
    }
  }
}

TEST_CASE("roadside: no road gives nothing") {
  LayoutMap map(16, 16);
  CHECK(trace_roadside_curves(map, {}).empty());
  CHECK(sample_roadside_points(map, {}).empty());
}
