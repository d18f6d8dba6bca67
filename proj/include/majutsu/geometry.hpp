#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "majutsu/common.hpp"

namespace majutsu::geometry {

/// Planar polygon in map meters: CCW outer ring, CW holes. Rings are stored
/// open (the first vertex is not repeated).
struct Polygon {
  std::vector<Vec2> outer;
  std::vector<std::vector<Vec2>> holes;

  double area() const;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

double signed_area(const std::vector<Vec2>& ring);

struct Aabb {
  Vec3 min;
  Vec3 max;
  Vec3 extent() const { return max - min; }
  friend bool operator==(const Aabb&, const Aabb&) = default;
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<Vec3> normals;  // per vertex, unit length
  std::vector<Vec2> uvs;      // optional, per vertex

  bool empty() const noexcept { return triangles.empty(); }
  Aabb bounds() const;
  double surface_area() const;
  /// Divergence-theorem volume; meaningful for closed, outward-wound meshes.
  double signed_volume() const;
  double triangle_area(std::size_t t) const;
  friend bool operator==(const Mesh&, const Mesh&) = default;
};

/// Recomputes per-vertex normals as the area-weighted mean of incident faces.
void compute_vertex_normals(Mesh& mesh);

/// Minimum-area rectangle. `yaw` in [0, pi) is the direction of the
/// `half_w` axis; canonical form keeps half_w <= half_l.
struct OrientedBox {
  Vec2 center;
  double yaw = 0.0;
  double half_w = 0.0;
  double half_l = 0.0;

  double area() const { return 4.0 * half_w * half_l; }
  Vec2 axis_w() const;
  Vec2 axis_l() const;
  std::array<Vec2, 4> corners() const;
  bool contains(Vec2 p, double eps = 1e-6) const;
  friend bool operator==(const OrientedBox&, const OrientedBox&) = default;
};

/// world = translation + Rz(yaw) * diag(xy_scale, xy_scale, z_scale) * local
struct SimilarityPlacement {
  Vec3 translation;
  double yaw = 0.0;
  double xy_scale = 1.0;
  double z_scale = 1.0;

  Vec3 apply(Vec3 local) const;
  bool valid() const;
  friend bool operator==(const SimilarityPlacement&, const SimilarityPlacement&) = default;
};

struct PointCloud {
  std::vector<Vec3> points;
  std::size_t count() const noexcept { return points.size(); }
};

struct SilhouetteMask {
  int resolution = 0;
  Bitmask bits;
};

std::vector<Vec2> convex_hull(std::vector<Vec2> points);

Mesh extrude_footprint(const Polygon& footprint, double height);
OrientedBox compute_obb(const std::vector<Vec2>& points);
SimilarityPlacement fit_placement(const Aabb& asset_bounds, const OrientedBox& obb,
                                  double target_height);
PointCloud sample_mesh_surface(const Mesh& mesh, std::size_t n, std::uint64_t seed);

/// Fixed isometric orthographic camera (azimuth 45 deg, elevation
/// atan(1/sqrt 2)) fitted to a bounding box with a 5% margin per side.
class IsoCamera {
 public:
  static constexpr double kAzimuth = 0.78539816339744830962;      // pi/4
  static constexpr double kElevation = 0.61547970867038734107;    // atan(1/sqrt 2)
  static constexpr double kMargin = 0.05;

  IsoCamera(const Aabb& bounds, int resolution);
  /// Continuous pixel coordinates; pixel (i, j) has its center at (i+0.5, j+0.5).
  Vec2 project(Vec3 p) const;
  int resolution() const noexcept { return resolution_; }

 private:
  Vec3 right_;
  Vec3 up_;
  Vec2 origin_;
  double scale_ = 1.0;
  int resolution_ = 0;
};

SilhouetteMask render_iso_silhouette(const Mesh& mesh, int resolution);
double silhouette_iou(const SilhouetteMask& a, const SilhouetteMask& b);

/// Ear-clipped triangulation of a polygon with holes at z = 0.
Mesh triangulate_polygon(const Polygon& polygon);
Mesh triangulate_layer_mask(const Bitmask& mask, double meters_per_pixel);

/// Appends `other` to `into` with index offsetting.
void append_mesh(Mesh& into, const Mesh& other);

}  // namespace majutsu::geometry
