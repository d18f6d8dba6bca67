#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "majutsu/common.hpp"
#include "majutsu/layout.hpp"

namespace majutsu::placement {

enum class PlacementKind : std::uint8_t { Tree, Streetlight };
enum class PlacementSource : std::uint8_t { VegetationFill, Roadside };

std::string_view kind_name(PlacementKind kind);

struct PlacementPoint {
  Vec2 position;  // map meters
  PlacementKind kind = PlacementKind::Tree;
  PlacementSource source = PlacementSource::VegetationFill;
  friend bool operator==(const PlacementPoint&, const PlacementPoint&) = default;
};

struct SamplingConfig {
  double radius_r = 8.0;
  int max_attempts_k = 30;
  double roadside_spacing_s = 25.0;
  double roadside_offset_d = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Bridson dart throwing restricted to the set pixels of `mask`. Disjoint
/// mask regions are seeded in a seeded-shuffled scan order.
std::vector<PlacementPoint> poisson_disk_sample(const Bitmask& mask, double meters_per_pixel,
                                                const SamplingConfig& cfg);

inline constexpr double kFarDistance = std::numeric_limits<double>::infinity();

/// Exact Euclidean distance (meters) from each pixel center to the nearest
/// set pixel center; set pixels are 0, an empty mask yields kFarDistance.
Grid<double> distance_transform(const Bitmask& mask, double meters_per_pixel);

/// One iso-distance curve around the road network, resampled by arc length.
struct RoadsideCurve {
  std::vector<Vec2> polyline;  // marching-squares iso-line at offset_d
  bool closed = false;
  double length = 0.0;
  struct Sample {
    Vec2 position;
    double arc = 0.0;  // arc length along the polyline
    std::size_t index = 0;
    PlacementKind kind = PlacementKind::Tree;
    bool kept = false;  // false when it collided with road, building or water
  };
  std::vector<Sample> samples;
};

std::vector<RoadsideCurve> trace_roadside_curves(const layout::LayoutMap& layout,
                                                 const SamplingConfig& cfg);

std::vector<PlacementPoint> sample_roadside_points(const layout::LayoutMap& layout,
                                                   const SamplingConfig& cfg);

/// Sample value of a grid at a map-frame point (nearest pixel).
double sample_grid(const Grid<double>& grid, Vec2 p, double meters_per_pixel);

}  // namespace majutsu::placement
