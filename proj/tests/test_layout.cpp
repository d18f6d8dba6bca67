#include <cmath>
#include <set>
#include <tuple>

#include "doctest.h"
#include "majutsu/layout.hpp"
#include "oracles.hpp"

using namespace majutsu;
using namespace majutsu::layout;

namespace {

LayoutMap with_block(int w, int h, int x0, int y0, int bw, int bh, SemanticClass cls) {
  LayoutMap map(w, h);
  for (int y = y0; y < y0 + bh; ++y)
    for (int x = x0; x < x0 + bw; ++x) map.set(x, y, cls);
  return map;
}

Bitmask rect_mask(int w, int h, int x0, int y0, int bw, int bh) {
  Bitmask m(w, h, 0);
  for (int y = y0; y < y0 + bh; ++y)
    for (int x = x0; x < x0 + bw; ++x) m.at(x, y) = 1;
  return m;
}

std::size_t perimeter_pixels(const Bitmask& m) {
  std::size_t n = 0;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y)) continue;
      const bool edge = !m.contains(x - 1, y) || !m.at(x - 1, y) || !m.contains(x + 1, y) ||
                        !m.at(x + 1, y) || !m.contains(x, y - 1) || !m.at(x, y - 1) ||
                        !m.contains(x, y + 1) || !m.at(x, y + 1);
      n += edge;
    }
  }
  return n;
}

}  // namespace

TEST_CASE("palette is five distinct colors") {
  std::set<std::tuple<int, int, int>> seen;
  for (auto cls : kAllClasses) {
    const Rgb c = palette_color(cls);
    seen.insert(std::make_tuple(int{c.r}, int{c.g}, int{c.b}));
  }
  CHECK(seen.size() == 5);
  CHECK(palette_color(SemanticClass::Building) == Rgb{230, 90, 60});
  CHECK(palette_json().find("\"vegetation\"") != std::string::npos);
}

TEST_CASE("decode all-ground 512x512 layout") {
  const LayoutMap ground(512, 512);
  const LayoutMap decoded = decode_layout_image(encode_layout_image(ground));
  const auto hist = decoded.histogram();
  CHECK(hist[0] == 262144);
  for (int c = 1; c < kClassCount; ++c) CHECK(hist[static_cast<std::size_t>(c)] == 0);
  CHECK(decoded.meters_per_pixel == 2.0);
}

TEST_CASE("non-palette color is rejected with its location") {
  std::vector<std::uint8_t> rgb(4 * 3 * 3, 200);
  const std::size_t o = (1 * 4 + 2) * 3;
  rgb[o] = 1;
  rgb[o + 1] = 2;
  rgb[o + 2] = 3;
  try {
    decode_layout_image(encode_rgb8_png(4, 3, rgb));
    FAIL("expected NonPaletteColor");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPaletteColor);
    CHECK(e.detail() == "2,1,(1,2,3)");
  }
}

TEST_CASE("corrupt bytes") {
  const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  CHECK_THROWS_AS(decode_layout_image(junk), Error);
  auto png = encode_layout_image(LayoutMap(8, 8));
  png.resize(png.size() / 2);
  try {
    decode_layout_image(png);
    FAIL("expected CorruptImage");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CorruptImage);
  }
}

TEST_CASE("10x10 building block histogram") {
  const LayoutMap map = with_block(32, 32, 5, 7, 10, 10, SemanticClass::Building);
  const auto png = encode_layout_image(map);
  const LayoutMap back = decode_layout_image(png);
  CHECK(back.histogram()[static_cast<int>(SemanticClass::Building)] == 100);
  // Palette round-trip is bit exact.
  CHECK(encode_layout_image(back) == png);
  std::size_t total = 0;
  for (auto n : back.histogram()) total += n;
  CHECK(total == 32 * 32);
}

TEST_CASE("height decode is linear") {
  const std::vector<std::uint16_t> codes{255, 0, 128};
  const HeightMap h8 = decode_height_image(encode_gray_png(3, 1, 8, codes), 150.0);
  CHECK(h8.at(0, 0) == doctest::Approx(150.0));
  CHECK(h8.at(1, 0) == 0.0);
  CHECK(h8.at(2, 0) == doctest::Approx(75.294).epsilon(1e-5));
  CHECK(h8.at(2, 0) == doctest::Approx(128.0 / 255.0 * 150.0));

  const std::vector<std::uint16_t> wide{65535, 32768};
  const HeightMap h16 = decode_height_image(encode_gray_png(2, 1, 16, wide), 100.0);
  CHECK(h16.at(0, 0) == doctest::Approx(100.0));
  CHECK(h16.at(1, 0) == doctest::Approx(32768.0 / 65535.0 * 100.0));

  CHECK_THROWS_AS(decode_height_image(encode_gray_png(3, 1, 8, codes), -1.0), Error);
  try {
    decode_height_image(encode_layout_image(LayoutMap(2, 2)), 150.0);
    FAIL("RGB height image accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CorruptImage);
  }
}

TEST_CASE("height encode/decode round trip at 16 bits") {
  HeightMap h(4, 4, 0.0, 150.0);
  h.set(1, 1, 42.0);
  h.set(2, 3, 149.0);
  const HeightMap back = decode_height_image(encode_height_image(h), 150.0);
  CHECK(back.at(1, 1) == doctest::Approx(42.0).epsilon(1e-4));
  CHECK(back.at(2, 3) == doctest::Approx(149.0).epsilon(1e-4));
}

TEST_CASE("consistency validation and repair") {
  LayoutMap map = with_block(16, 16, 2, 2, 4, 4, SemanticClass::Building);
  map.set(10, 10, SemanticClass::Water);
  HeightMap h(16, 16);
  for (int y = 2; y < 6; ++y)
    for (int x = 2; x < 6; ++x) h.set(x, y, 20.0);

  SUBCASE("heights exactly on buildings") {
    const auto r = validate_consistency(map, h);
    CHECK(r.clean());
    CHECK(r.valid_after_repair);
  }
  SUBCASE("height on water") {
    h.set(10, 10, 50.0);
    const auto r = validate_consistency(map, h);
    REQUIRE(r.stray_height.size() == 1);
    CHECK(r.stray_height[0] == Pixel{10, 10});
    ValidationReport rep;
    const HeightMap fixed = repair_consistency(map, h, {}, &rep);
    CHECK(fixed.at(10, 10) == 0.0);
    CHECK(rep.valid_after_repair);
    CHECK(!rep.warnings.empty());
  }
  SUBCASE("zero-height building clamps to min height") {
    for (int y = 2; y < 6; ++y)
      for (int x = 2; x < 6; ++x) h.set(x, y, 0.0);
    const auto r = validate_consistency(map, h);
    CHECK(r.low_building.size() == 16);
    ValidationReport rep;
    const HeightMap fixed = repair_consistency(map, h, {}, &rep);
    CHECK(fixed.at(3, 3) == 3.0);
    CHECK(rep.valid_after_repair);
    CHECK(validate_consistency(map, fixed).clean());
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(validate_consistency(map, HeightMap(8, 8)), Error);
  }
}

TEST_CASE("instance extraction") {
  SUBCASE("empty mask") {
    CHECK(extract_building_instances(LayoutMap(16, 16), HeightMap(16, 16)).empty());
  }
  SUBCASE("two disjoint squares") {
    LayoutMap map(40, 40);
    HeightMap h(40, 40);
    for (int y = 0; y < 10; ++y) {
      for (int x = 0; x < 10; ++x) {
        map.set(2 + x, 3 + y, SemanticClass::Building);
        h.set(2 + x, 3 + y, 10.0 + x);
        map.set(25 + x, 20 + y, SemanticClass::Building);
        h.set(25 + x, 20 + y, 30.0);
      }
    }
    const auto inst = extract_building_instances(map, h);
    REQUIRE(inst.size() == 2);
    CHECK(inst[0].id == "bldg_0001");
    CHECK(inst[1].id == "bldg_0002");
    CHECK(inst[0].pixel_count == 100);
    CHECK(inst[1].pixel_count == 100);
    CHECK(inst[0].target_height == doctest::Approx(14.5));
    CHECK(inst[1].target_height == doctest::Approx(30.0));
    CHECK(inst[0].footprint.area() == doctest::Approx(400.0));
    CHECK(inst[0].obb.area() >= inst[0].footprint.area() - 1e-9);
  }
  SUBCASE("diagonal touch merges under 8-connectivity") {
    LayoutMap map(20, 20);
    HeightMap h(20, 20);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        map.set(2 + x, 2 + y, SemanticClass::Building);
        map.set(6 + x, 6 + y, SemanticClass::Building);
        h.set(2 + x, 2 + y, 9.0);
        h.set(6 + x, 6 + y, 9.0);
      }
    }
    const auto inst = extract_building_instances(map, h);
    REQUIRE(inst.size() == 1);
    CHECK(inst[0].pixel_count == 32);
    CHECK(inst[0].footprint.outer.size() >= 6);
    CHECK(inst[0].footprint.area() == doctest::Approx(32 * 4.0).epsilon(0.1));
  }
  SUBCASE("tiny components are dropped with a warning") {
    LayoutMap map(10, 10);
    HeightMap h(10, 10);
    map.set(1, 1, SemanticClass::Building);
    h.set(1, 1, 5.0);
    std::vector<std::string> warnings;
    CHECK(extract_building_instances(map, h, {}, &warnings).empty());
    CHECK(warnings.size() == 1);
  }
}

TEST_CASE("footprint tracing") {
  SUBCASE("axis-aligned 10x20 rectangle") {
    const auto fp = trace_footprint(rect_mask(30, 30, 3, 4, 10, 20), 2.0);
    CHECK(fp.outer.size() == 4);
    CHECK(fp.holes.empty());
    CHECK(fp.area() == doctest::Approx(200.0 * 4.0));
    CHECK(signed_ring_area(fp.outer) > 0.0);
  }
  SUBCASE("single pixel is a unit square") {
    const auto fp = trace_footprint(rect_mask(5, 5, 2, 2, 1, 1), 1.0);
    REQUIRE(fp.outer.size() == 4);
    CHECK(fp.area() == doctest::Approx(1.0));
    // Pixel (2,2) of a 5-row grid covers x in [2,3], y in [2,3].
    for (const Vec2& v : fp.outer) {
      CHECK((v.x == 2.0 || v.x == 3.0));
      CHECK((v.y == 2.0 || v.y == 3.0));
    }
  }
  SUBCASE("L shape has six vertices") {
    Bitmask m = rect_mask(20, 20, 2, 2, 10, 10);
    for (int y = 2; y < 7; ++y)
      for (int x = 7; x < 12; ++x) m.at(x, y) = 0;
    const auto fp = trace_footprint(m, 1.0);
    CHECK(fp.outer.size() == 6);
    CHECK(fp.area() == doctest::Approx(75.0));
  }
  SUBCASE("annulus has one CW hole") {
    Bitmask m = rect_mask(20, 20, 2, 2, 12, 12);
    for (int y = 5; y < 11; ++y)
      for (int x = 5; x < 11; ++x) m.at(x, y) = 0;
    const auto fp = trace_footprint(m, 1.0);
    REQUIRE(fp.holes.size() == 1);
    CHECK(signed_ring_area(fp.holes[0]) < 0.0);
    CHECK(fp.area() == doctest::Approx(144.0 - 36.0));
  }
  SUBCASE("errors") {
    try {
      trace_footprint(Bitmask(4, 4, 0), 1.0);
      FAIL("empty");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EmptyMask);
    }
    Bitmask two = rect_mask(10, 10, 0, 0, 2, 2);
    two.at(8, 8) = 1;
    try {
      trace_footprint(two, 1.0);
      FAIL("two components");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MultipleComponents);
    }
  }
}

TEST_CASE("property: labels match union-find and footprints respect the area bound") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const Bitmask m = oracle::random_mask(seed, 48, 40);
    int expected = 0;
    const auto ref = oracle::union_find_labels(m, &expected);
    const ComponentLabels got = label_components(m);
    REQUIRE(got.count == expected);
    for (std::size_t i = 0; i < m.size(); ++i) {
      CHECK(got.labels[i] == (ref[i] < 0 ? 0 : ref[i]));
    }
    const double mpp = 1.5;
    for (int l = 1; l <= got.count; ++l) {
      Bitmask comp(m.width(), m.height(), 0);
      for (std::size_t i = 0; i < m.size(); ++i) comp[i] = got.labels[i] == l;
      const auto fp = trace_footprint(comp, mpp);
      const double pixel_area = static_cast<double>(count_set(comp)) * mpp * mpp;
      CHECK(std::abs(fp.area() - pixel_area) <= perimeter_pixels(comp) * mpp * mpp);
      CHECK(oracle::ring_area(fp.outer) > 0.0);
      // Deterministic.
      CHECK(trace_footprint(comp, mpp) == fp);
    }
  }
}
