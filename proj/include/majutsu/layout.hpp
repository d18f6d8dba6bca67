#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "majutsu/common.hpp"
#include "majutsu/geometry.hpp"

namespace majutsu::layout {

enum class SemanticClass : std::uint8_t { Ground = 0, Road, Water, Vegetation, Building };

inline constexpr int kClassCount = 5;
inline constexpr std::array<SemanticClass, kClassCount> kAllClasses = {
    SemanticClass::Ground, SemanticClass::Road, SemanticClass::Water,
    SemanticClass::Vegetation, SemanticClass::Building};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

Rgb palette_color(SemanticClass cls);
std::string_view class_name(SemanticClass cls);
SemanticClass class_from_name(std::string_view name);
/// Machine-readable palette (the contents of palette.json).
std::string palette_json();

struct LayoutMap {
  Grid<SemanticClass> cells;
  double meters_per_pixel = 2.0;

  LayoutMap() = default;
  LayoutMap(int width, int height, SemanticClass fill = SemanticClass::Ground,
            double mpp = 2.0)
      : cells(width, height, fill), meters_per_pixel(mpp) {}

  int width() const noexcept { return cells.width(); }
  int height() const noexcept { return cells.height(); }
  SemanticClass at(int x, int y) const { return cells.at(x, y); }
  void set(int x, int y, SemanticClass c) { cells.at(x, y) = c; }

  std::array<std::size_t, kClassCount> histogram() const;
  Bitmask mask(SemanticClass cls) const;
  friend bool operator==(const LayoutMap&, const LayoutMap&) = default;
};

struct HeightMap {
  Grid<double> heights;
  double h_max = 150.0;

  HeightMap() = default;
  HeightMap(int width, int height, double fill = 0.0, double hmax = 150.0)
      : heights(width, height, fill), h_max(hmax) {}

  int width() const noexcept { return heights.width(); }
  int height() const noexcept { return heights.height(); }
  double at(int x, int y) const { return heights.at(x, y); }
  void set(int x, int y, double h) { heights.at(x, y) = h; }
};

// PNG codecs. Layout maps are 8-bit RGB, height maps 8- or 16-bit grayscale.
LayoutMap decode_layout_image(std::span<const std::uint8_t> png, double meters_per_pixel = 2.0);
std::vector<std::uint8_t> encode_layout_image(const LayoutMap& layout);
HeightMap decode_height_image(std::span<const std::uint8_t> png, double h_max = 150.0);
/// Linear quantization of heights to 16-bit (or 8-bit) gray codes.
std::vector<std::uint8_t> encode_height_image(const HeightMap& hmap, int bit_depth = 16);

/// Raw writers (tightly packed samples) used for fixtures and provider payloads.
std::vector<std::uint8_t> encode_rgb8_png(int width, int height,
                                          std::span<const std::uint8_t> rgb);
std::vector<std::uint8_t> encode_gray_png(int width, int height, int bit_depth,
                                          std::span<const std::uint16_t> codes);

struct ConsistencyOptions {
  double min_height = 3.0;
};

struct ValidationReport {
  std::vector<Pixel> low_building;  // building pixels below min_height
  std::vector<Pixel> stray_height;  // non-building pixels with height > 0
  std::vector<std::string> warnings;

  bool clean() const noexcept { return low_building.empty() && stray_height.empty(); }
  /// True when the repair policy leaves no violations (always the case for
  /// finite, non-negative inputs).
  bool valid_after_repair = false;
};

ValidationReport validate_consistency(const LayoutMap& layout, const HeightMap& hmap,
                                      const ConsistencyOptions& opts = {});

/// Repair policy: clamp low building pixels up to min_height, zero stray
/// non-building heights. Returns the repaired map; `report` receives warnings.
HeightMap repair_consistency(const LayoutMap& layout, const HeightMap& hmap,
                             const ConsistencyOptions& opts = {},
                             ValidationReport* report = nullptr);

using FootprintPolygon = geometry::Polygon;

struct BuildingInstance {
  std::string id;
  std::size_t pixel_count = 0;
  std::vector<Pixel> pixels;  // raster order
  FootprintPolygon footprint;
  geometry::OrientedBox obb;
  double target_height = 0.0;
};

/// 8-connected component labels; 0 = background, components numbered from 1
/// in raster order of their first pixel.
struct ComponentLabels {
  Grid<int> labels;
  int count = 0;
};
ComponentLabels label_components(const Bitmask& mask);

struct ExtractOptions {
  std::size_t min_pixels = 4;
  double simplify_tol = -1.0;  // negative: 0.5 * meters_per_pixel
};

std::vector<BuildingInstance> extract_building_instances(
    const LayoutMap& layout, const HeightMap& hmap, const ExtractOptions& opts = {},
    std::vector<std::string>* warnings = nullptr);

/// Traces the pixel-edge boundary of a single 8-connected component, then
/// removes collinear vertices and applies Douglas-Peucker.
FootprintPolygon trace_footprint(const Bitmask& mask, double meters_per_pixel,
                                 double simplify_tol = -1.0);

/// Boundary rings of every component of `mask`, grouped per component
/// (outer CCW first, then CW holes). Used by layer triangulation.
std::vector<FootprintPolygon> trace_all_components(const Bitmask& mask, double meters_per_pixel,
                                                   double simplify_tol = -1.0);

/// Similarity placement of an asset onto a building's oriented box and height.
geometry::SimilarityPlacement fit_placement(const geometry::Aabb& asset_bounds,
                                            const BuildingInstance& instance);

std::vector<Vec2> douglas_peucker_ring(const std::vector<Vec2>& ring, double tol);
double signed_ring_area(const std::vector<Vec2>& ring);

}  // namespace majutsu::layout
